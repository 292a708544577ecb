//! Uniform dispatch over the four solvers.

use std::time::{Duration, Instant};

use clap::ValueEnum;
use pisr_core::bnb::{solve_milp, BnbConfig, BnbStatus};
use pisr_core::heuristic::{tree_search, SearchStatus, DEFAULT_NODE_LIMIT};
use pisr_core::milp::{build_f1, build_f3};
use pisr_core::oracle::{brute_force_solve, OracleStatus};
use pisr_core::{Instance, RoutePlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum)]
pub enum Method {
    Heuristic,
    Oracle,
    #[value(name = "bnb-f1")]
    BnbF1,
    #[value(name = "bnb-f3")]
    BnbF3,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Heuristic => "heuristic",
            Method::Oracle => "oracle",
            Method::BnbF1 => "bnb-f1",
            Method::BnbF3 => "bnb-f3",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Method::from_str(text.trim(), true).ok()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Limits {
    /// Node budget. The heuristic falls back to its own default when unset.
    pub nodes: Option<u64>,
    pub time: Option<Duration>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Proven optimal, or the heuristic tree was exhausted.
    Complete,
    /// A limit stopped the search after an incumbent was found.
    Incumbent,
    Infeasible,
    /// A limit stopped the search before any incumbent.
    NoSolution,
    Failed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Complete | Outcome::Incumbent => 0,
            Outcome::Failed => 2,
            Outcome::Infeasible => 3,
            Outcome::NoSolution => 4,
        }
    }

    /// Footnote marker of the results table.
    pub fn mark(self) -> &'static str {
        match self {
            Outcome::Incumbent => "*",
            Outcome::NoSolution | Outcome::Failed => "**",
            Outcome::Complete | Outcome::Infeasible => "",
        }
    }
}

#[derive(Clone, Debug)]
pub struct HeuristicDetail {
    pub bfs_cost: Option<f64>,
    pub bfs_time: f64,
    pub final_time: f64,
    pub nodes: u64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub method: Method,
    pub outcome: Outcome,
    pub status: String,
    pub plan: Option<RoutePlan>,
    pub cost: Option<f64>,
    pub time: f64,
    pub heuristic: Option<HeuristicDetail>,
    pub error: Option<String>,
}

impl SolveReport {
    pub fn summary(&self) -> String {
        let cost = self.cost.map_or_else(|| "none".to_string(), |c| format!("{c:.6}"));
        format!("method={} cost={} time={:.6} status={}", self.method.name(), cost, self.time, self.status)
    }
}

pub fn run_method(instance: &Instance, method: Method, limits: &Limits) -> SolveReport {
    let start = Instant::now();
    let mut report = match method {
        Method::Heuristic => run_heuristic(instance, limits),
        Method::Oracle => run_oracle(instance),
        Method::BnbF1 | Method::BnbF3 => run_bnb(instance, method, limits),
    };
    if report.time == 0.0 {
        report.time = start.elapsed().as_secs_f64();
    }
    report
}

fn run_heuristic(instance: &Instance, limits: &Limits) -> SolveReport {
    let res = tree_search(instance, limits.nodes.unwrap_or(DEFAULT_NODE_LIMIT));
    let outcome = match (res.status, &res.final_plan) {
        (SearchStatus::Exhausted, _) => Outcome::Complete,
        (SearchStatus::NodeLimit, Some(_)) => Outcome::Incumbent,
        (SearchStatus::NodeLimit, None) => Outcome::NoSolution,
        (SearchStatus::NoFeasibleFound, _) => Outcome::Infeasible,
    };
    SolveReport {
        method: Method::Heuristic,
        outcome,
        status: res.status.as_str().to_string(),
        cost: res.final_cost,
        plan: res.final_plan,
        time: res.total_time,
        heuristic: Some(HeuristicDetail {
            bfs_cost: res.bfs_cost,
            bfs_time: res.bfs_time,
            final_time: res.total_time,
            nodes: res.nodes_explored,
        }),
        error: None,
    }
}

fn run_oracle(instance: &Instance) -> SolveReport {
    let start = Instant::now();
    match brute_force_solve(instance) {
        Ok(res) => SolveReport {
            method: Method::Oracle,
            outcome: match res.status {
                OracleStatus::Optimal => Outcome::Complete,
                OracleStatus::Infeasible => Outcome::Infeasible,
            },
            status: res.status.as_str().to_string(),
            plan: res.plan,
            cost: res.objective,
            time: start.elapsed().as_secs_f64(),
            heuristic: None,
            error: None,
        },
        Err(e) => failed(Method::Oracle, e.to_string(), start),
    }
}

fn run_bnb(instance: &Instance, method: Method, limits: &Limits) -> SolveReport {
    let model = if method == Method::BnbF1 { build_f1(instance) } else { build_f3(instance) };
    let config = BnbConfig { time_limit: limits.time, node_limit: limits.nodes, ..BnbConfig::default() };
    let res = solve_milp(&model, instance, &config);
    let outcome = match res.status {
        BnbStatus::Optimal => Outcome::Complete,
        BnbStatus::Infeasible => Outcome::Infeasible,
        BnbStatus::FeasibleTimeout | BnbStatus::TimeLimit | BnbStatus::NodeLimit => {
            if res.incumbent_plan.is_some() {
                Outcome::Incumbent
            } else {
                Outcome::NoSolution
            }
        }
    };
    SolveReport {
        method,
        outcome,
        status: res.status.as_str().to_string(),
        plan: res.incumbent_plan,
        cost: res.incumbent_objective,
        time: res.wall_time,
        heuristic: None,
        error: None,
    }
}

fn failed(method: Method, message: String, start: Instant) -> SolveReport {
    SolveReport {
        method,
        outcome: Outcome::Failed,
        status: "error".to_string(),
        plan: None,
        cost: None,
        time: start.elapsed().as_secs_f64(),
        heuristic: None,
        error: Some(message),
    }
}

/// Report for a cell that could not run at all.
pub fn failed_report(method: Method, message: String) -> SolveReport {
    failed(method, message, Instant::now())
}
