//! Route plans and their evaluation.
//!
//! A plan is a set of at most `n_v` cycles, each a task sequence that starts
//! and ends at the depot and is repeated forever by one vehicle. For task
//! `i` on cycle `v`:
//!
//! * `u_i` is the elapsed time from leaving the depot to finishing `i`,
//! * `v_i` is the time from finishing `i` back to the depot, which is also
//!   the delivery time of the data collected at `i`,
//! * `u_i + v_i = L_v`, the cycle length, which is also the revisit period
//!   of every task on the cycle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::instance::{Instance, DEPOT, FORMAT_VERSION};

/// Absolute slack (seconds) allowed when comparing a cycle length against a
/// revisit limit.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("task {0} appears more than once")]
    DuplicateTask(usize),
    #[error("task {0} is not covered by any cycle")]
    MissingTask(usize),
    #[error("task id {0} does not exist in the instance")]
    UnknownTask(usize),
    #[error("plan uses {cycles} cycles but only {vehicles} vehicles are available")]
    TooManyCycles { cycles: usize, vehicles: usize },
    #[error("plan was made for instance {plan} but instance hash is {instance}")]
    HashMismatch { plan: String, instance: String },
    #[error("malformed plan file: {0}")]
    Json(String),
}

/// Ordered task sequences, one per used vehicle. Empty cycles are dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoutePlan {
    cycles: Vec<Vec<usize>>,
}

impl RoutePlan {
    pub fn new(cycles: Vec<Vec<usize>>) -> Self {
        Self { cycles: cycles.into_iter().filter(|c| !c.is_empty()).collect() }
    }

    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }

    pub fn n_cycles(&self) -> usize {
        self.cycles.len()
    }

    /// Cycles ordered by their smallest task id. Two plans describing the
    /// same routes have equal canonical forms.
    pub fn canonical(&self) -> RoutePlan {
        let mut cycles = self.cycles.clone();
        cycles.sort_by_key(|c| c.iter().copied().min());
        RoutePlan { cycles }
    }

    /// Checks that the plan partitions the instance's tasks into at most
    /// `n_v` cycles.
    pub fn validate(&self, instance: &Instance) -> Result<(), PlanError> {
        let n = instance.n_tasks();
        let mut seen = vec![false; n + 1];
        for &task in self.cycles.iter().flatten() {
            if task == DEPOT || task > n {
                return Err(PlanError::UnknownTask(task));
            }
            if std::mem::replace(&mut seen[task], true) {
                return Err(PlanError::DuplicateTask(task));
            }
        }
        if let Some(missing) = (1..=n).find(|&t| !seen[t]) {
            return Err(PlanError::MissingTask(missing));
        }
        if self.cycles.len() > instance.n_vehicles() {
            return Err(PlanError::TooManyCycles {
                cycles: self.cycles.len(),
                vehicles: instance.n_vehicles(),
            });
        }
        Ok(())
    }

    /// Every arc `(from, to)` used by the plan, depot legs included.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cycles.iter().flat_map(|cycle| {
            let nodes = std::iter::once(DEPOT)
                .chain(cycle.iter().copied())
                .chain(std::iter::once(DEPOT));
            let next = nodes.clone().skip(1);
            nodes.zip(next)
        })
    }

    pub fn to_json(&self, instance_hash: &str) -> String {
        let file = PlanFile {
            version: FORMAT_VERSION,
            instance_hash: instance_hash.to_string(),
            cycles: self.cycles.clone(),
        };
        canonical::to_string(&serde_json::to_value(&file).expect("plan serializes"))
    }

    /// Parses a plan file, returning the plan and the instance hash it names.
    pub fn from_json(text: &str) -> Result<(RoutePlan, String), PlanError> {
        let file: PlanFile = serde_json::from_str(text).map_err(|e| PlanError::Json(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(PlanError::Json(format!("unsupported version {}", file.version)));
        }
        Ok((RoutePlan::new(file.cycles), file.instance_hash))
    }

    /// Parses a plan file and checks it was made for `instance`.
    pub fn from_json_for(text: &str, instance: &Instance) -> Result<RoutePlan, PlanError> {
        let (plan, hash) = Self::from_json(text)?;
        let expected = instance.hash();
        if hash != expected {
            return Err(PlanError::HashMismatch { plan: hash, instance: expected });
        }
        Ok(plan)
    }
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    version: u32,
    instance_hash: String,
    cycles: Vec<Vec<usize>>,
}

/// Timing of one task within its cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskTiming {
    pub task: usize,
    /// Index into the plan's cycles.
    pub cycle: usize,
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub task: usize,
    pub cycle_length: f64,
    pub limit: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanMetrics {
    /// Indexed by `task - 1`.
    pub timings: Vec<TaskTiming>,
    pub cycle_lengths: Vec<f64>,
    /// Maximum delivery time over all tasks.
    pub z: f64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl PlanMetrics {
    pub fn u(&self, task: usize) -> f64 {
        self.timings[task - 1].u
    }

    pub fn v(&self, task: usize) -> f64 {
        self.timings[task - 1].v
    }

    /// Delivery time `D_i`, equal to `v_i`.
    pub fn delivery(&self, task: usize) -> f64 {
        self.v(task)
    }

    pub fn cycle_of(&self, task: usize) -> usize {
        self.timings[task - 1].cycle
    }
}

pub fn evaluate_plan(instance: &Instance, plan: &RoutePlan) -> Result<PlanMetrics, PlanError> {
    plan.validate(instance)?;
    let n = instance.n_tasks();
    let mut timings = vec![TaskTiming { task: 0, cycle: 0, u: 0.0, v: 0.0 }; n];
    let mut cycle_lengths = Vec::with_capacity(plan.n_cycles());
    let mut violations = Vec::new();
    let mut z = 0.0f64;

    for (k, cycle) in plan.cycles().iter().enumerate() {
        let mut elapsed = 0.0;
        let mut prev = DEPOT;
        for &task in cycle {
            elapsed += instance.cost(prev, task);
            timings[task - 1] = TaskTiming { task, cycle: k, u: elapsed, v: 0.0 };
            prev = task;
        }
        // suffix sums back from the depot
        let mut back = 0.0;
        let mut next = DEPOT;
        for &task in cycle.iter().rev() {
            back += instance.cost(task, next);
            timings[task - 1].v = back;
            next = task;
        }
        let length = elapsed + instance.cost(prev, DEPOT);
        cycle_lengths.push(length);
        z = z.max(timings[cycle[0] - 1].v);

        for &task in cycle {
            if let Some(limit) = instance.revisit_limit(task) {
                if length > limit + FEASIBILITY_TOL {
                    violations.push(Violation { task, cycle_length: length, limit });
                }
            }
        }
    }
    // the first task of a cycle has the largest v, but take the max anyway
    for t in &timings {
        z = z.max(t.v);
    }
    violations.sort_by_key(|v| v.task);

    Ok(PlanMetrics { timings, cycle_lengths, z, feasible: violations.is_empty(), violations })
}
