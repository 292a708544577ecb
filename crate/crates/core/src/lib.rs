//! Planning toolkit for persistent surveillance routing with a fleet of
//! identical UAVs.
//!
//! Each vehicle repeats one cycle through the depot forever. Plans minimize
//! the largest data-delivery time (finish of a task until its data reaches
//! the depot) while keeping every cycle within the revisit limit of each
//! task it serves.
//!
//! Solvers:
//! * [`oracle::brute_force_solve`]: exhaustive search, ground truth for
//!   small instances.
//! * [`bnb::solve_milp`]: LP-based branch-and-bound over the node-based
//!   ([`milp::build_f1`]) or strengthened arc-based ([`milp::build_f3`])
//!   MILP models.
//! * [`heuristic::tree_search`]: greedy best-first assignment tree search
//!   with incumbent pruning.

pub mod bnb;
mod canonical;
pub mod generate;
pub mod heuristic;
pub mod instance;
pub mod lp;
pub mod milp;
pub mod oracle;
pub mod parallel;
pub mod plan;
pub mod tsp;

pub use generate::{generate_instance, ConstraintPolicy, GenerateError, GeneratorConfig};
pub use instance::{Instance, InstanceError, Point, Task, TravelMatrix, DEPOT};
pub use plan::{evaluate_plan, PlanError, PlanMetrics, RoutePlan};
