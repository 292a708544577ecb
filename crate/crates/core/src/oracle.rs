//! Exhaustive reference solver for small instances.
//!
//! Cycles are built one at a time. A new cycle is anchored on the
//! lowest-numbered unassigned task, which removes vehicle relabelings.
//! Within a cycle the search first tries to close it and then extends it
//! with unassigned tasks in increasing id order, so the first plan found
//! at a given cost is the lexicographically smallest cycle list.

use thiserror::Error;

use crate::instance::{Instance, DEPOT};
use crate::plan::{evaluate_plan, RoutePlan};

pub const ORACLE_CAP: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance has {got} tasks, oracle is limited to {cap}")]
    TooLarge { got: usize, cap: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleStatus {
    Optimal,
    Infeasible,
}

impl OracleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleStatus::Optimal => "optimal",
            OracleStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub status: OracleStatus,
    pub plan: Option<RoutePlan>,
    pub objective: Option<f64>,
    pub nodes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub cap: usize,
    /// Disables both pruning rules; leaves are still checked for feasibility.
    pub prune: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { cap: ORACLE_CAP, prune: true }
    }
}

const PRUNE_SLACK: f64 = 1e-6;
const TIE_TOL: f64 = 1e-9;

pub fn brute_force_solve(instance: &Instance) -> Result<OracleResult, OracleError> {
    brute_force_with(instance, &OracleConfig::default())
}

pub fn brute_force_with(instance: &Instance, config: &OracleConfig) -> Result<OracleResult, OracleError> {
    let n = instance.n_tasks();
    if n > config.cap {
        return Err(OracleError::TooLarge { got: n, cap: config.cap });
    }
    let mut search = Search {
        instance,
        prune: config.prune,
        assigned: vec![false; n + 1],
        n_assigned: 0,
        closed: Vec::new(),
        closed_z: 0.0,
        closed_ok: true,
        best: None,
        best_z: f64::INFINITY,
        nodes: 0,
    };
    search.open_cycle();
    let nodes = search.nodes;
    Ok(match search.best {
        Some(cycles) => {
            let plan = RoutePlan::new(cycles);
            let z = evaluate_plan(instance, &plan).expect("oracle plans cover every task").z;
            OracleResult { status: OracleStatus::Optimal, plan: Some(plan), objective: Some(z), nodes }
        }
        None => OracleResult { status: OracleStatus::Infeasible, plan: None, objective: None, nodes },
    })
}

struct Search<'a> {
    instance: &'a Instance,
    prune: bool,
    assigned: Vec<bool>,
    n_assigned: usize,
    closed: Vec<Vec<usize>>,
    /// Largest first-task delivery over closed cycles.
    closed_z: f64,
    /// False once a closed cycle violates a limit (no-pruning mode only).
    closed_ok: bool,
    best: Option<Vec<Vec<usize>>>,
    best_z: f64,
    nodes: u64,
}

/// Partial cycle: `length` runs from the depot to the last task.
struct Partial {
    tasks: Vec<usize>,
    length: f64,
    min_limit: f64,
}

impl Search<'_> {
    fn open_cycle(&mut self) {
        self.nodes += 1;
        let n = self.instance.n_tasks();
        if self.n_assigned == n {
            if self.closed_ok && self.closed_z < self.best_z - TIE_TOL {
                self.best_z = self.closed_z;
                self.best = Some(self.closed.clone());
            }
            return;
        }
        if self.closed.len() == self.instance.n_vehicles() {
            return;
        }
        let anchor = (1..=n).find(|&t| !self.assigned[t]).expect("unassigned task exists");
        let mut partial = Partial { tasks: Vec::new(), length: 0.0, min_limit: f64::INFINITY };
        self.extend(&mut partial, anchor);
    }

    fn extend(&mut self, partial: &mut Partial, anchor: usize) {
        let n = self.instance.n_tasks();
        if partial.tasks.contains(&anchor) {
            self.close(partial);
        }
        for t in 1..=n {
            if self.assigned[t] {
                continue;
            }
            let last = partial.tasks.last().copied().unwrap_or(DEPOT);
            let length = partial.length + self.instance.cost(last, t);
            let min_limit = partial.min_limit.min(self.instance.limit_or_inf(t));
            if self.prune {
                let first = partial.tasks.first().copied().unwrap_or(t);
                let closed = length + self.instance.cost(t, DEPOT);
                if closed > min_limit + PRUNE_SLACK {
                    continue;
                }
                let delivery = closed - self.instance.cost(DEPOT, first);
                if delivery.max(self.closed_z) >= self.best_z - TIE_TOL {
                    continue;
                }
            }
            self.nodes += 1;
            self.assigned[t] = true;
            self.n_assigned += 1;
            partial.tasks.push(t);
            let (saved_length, saved_limit) = (partial.length, partial.min_limit);
            partial.length = length;
            partial.min_limit = min_limit;
            self.extend(partial, anchor);
            partial.length = saved_length;
            partial.min_limit = saved_limit;
            partial.tasks.pop();
            self.n_assigned -= 1;
            self.assigned[t] = false;
        }
    }

    fn close(&mut self, partial: &Partial) {
        let last = *partial.tasks.last().expect("closed cycles are non-empty");
        let length = partial.length + self.instance.cost(last, DEPOT);
        let delivery = length - self.instance.cost(DEPOT, partial.tasks[0]);
        let ok = length <= partial.min_limit + PRUNE_SLACK;
        let (saved_z, saved_ok) = (self.closed_z, self.closed_ok);
        self.closed_z = self.closed_z.max(delivery);
        self.closed_ok &= ok;
        self.closed.push(partial.tasks.clone());
        self.open_cycle();
        self.closed.pop();
        self.closed_z = saved_z;
        self.closed_ok = saved_ok;
    }
}
