//! Greedy assignment tree search.
//!
//! Each tree node assigns one more task to the end of one vehicle's
//! sequence. Children are ranked by their scaled cost and explored
//! depth-first, so the first leaf reached is the greedy best-first
//! solution. The search then backtracks through the remaining siblings,
//! pruning any node whose cost already reaches the incumbent, until the
//! tree is exhausted or the node budget runs out.
//!
//! The cost of a node is the largest first-task delivery time over the
//! vehicles, with each partial sequence closed at the depot. Appending a
//! task never lowers it, so a pruned node cannot lead to a better leaf.

use std::time::Instant;

use log::trace;

use crate::instance::{Instance, DEPOT};
use crate::plan::{evaluate_plan, RoutePlan, FEASIBILITY_TOL};

pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

/// Largest first-task delivery time over the vehicles; 0 when nothing is
/// assigned.
pub fn node_cost(instance: &Instance, assignments: &[Vec<usize>]) -> f64 {
    assignments.iter().filter(|s| !s.is_empty()).map(|s| delivery(instance, s)).fold(0.0, f64::max)
}

fn delivery(instance: &Instance, seq: &[usize]) -> f64 {
    let inner: f64 = seq.windows(2).map(|w| instance.cost(w[0], w[1])).sum();
    inner + instance.cost(seq[seq.len() - 1], DEPOT)
}

/// True when every vehicle's closed cycle fits the limits of its tasks.
pub fn node_feasible(instance: &Instance, assignments: &[Vec<usize>]) -> bool {
    assignments.iter().filter(|s| !s.is_empty()).all(|s| {
        let length = instance.cost(DEPOT, s[0]) + delivery(instance, s);
        let limit = s.iter().map(|&t| instance.limit_or_inf(t)).fold(f64::INFINITY, f64::min);
        length <= limit + FEASIBILITY_TOL
    })
}

/// Largest revisit limit over the constrained tasks, if any.
fn max_limit(instance: &Instance) -> Option<f64> {
    instance.revisit_limits().values().copied().reduce(f64::max)
}

/// `(S_c1, S_c2)` for the node that just put `task` on `vehicle`.
pub fn scale_factors(instance: &Instance, assignments: &[Vec<usize>], task: usize, vehicle: usize) -> (f64, f64) {
    let s1 = match (instance.revisit_limit(task), max_limit(instance)) {
        (Some(r), Some(r_max)) => r / r_max,
        _ => 1.0,
    };
    let n_t = assignments[vehicle].iter().filter(|&&t| instance.revisit_limit(t).is_some()).count();
    (s1, 10f64.powi(-(n_t as i32)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchStatus {
    /// Every unpruned node was visited.
    Exhausted,
    /// Stopped at the node budget, with or without a plan.
    NodeLimit,
    /// Exhausted without reaching a feasible leaf.
    NoFeasibleFound,
}

impl SearchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchStatus::Exhausted => "exhausted",
            SearchStatus::NodeLimit => "node_limit",
            SearchStatus::NoFeasibleFound => "no_feasible_found",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub status: SearchStatus,
    /// First leaf reached by the greedy descent.
    pub bfs_plan: Option<RoutePlan>,
    pub bfs_cost: Option<f64>,
    /// Nodes visited when the first leaf was reached.
    pub bfs_nodes: u64,
    pub bfs_time: f64,
    pub final_plan: Option<RoutePlan>,
    pub final_cost: Option<f64>,
    /// Nodes visited, the root included.
    pub nodes_explored: u64,
    pub total_time: f64,
}

#[derive(Clone, Copy, Debug)]
struct Child {
    task: usize,
    vehicle: usize,
    cost: f64,
    scaled: f64,
}

/// Per-vehicle sums kept up to date as tasks are appended.
#[derive(Clone, Copy, Debug)]
struct Lane {
    first: usize,
    last: usize,
    /// Travel from the first task to the last one.
    inner: f64,
    delivery: f64,
    min_limit: f64,
    n_t: usize,
    len: usize,
}

const EMPTY: Lane =
    Lane { first: DEPOT, last: DEPOT, inner: 0.0, delivery: 0.0, min_limit: f64::INFINITY, n_t: 0, len: 0 };

struct State<'a> {
    instance: &'a Instance,
    r_max: Option<f64>,
    lanes: Vec<Lane>,
    seqs: Vec<Vec<usize>>,
    assigned: Vec<bool>,
    n_assigned: usize,
    undo: Vec<(usize, usize, Lane)>,
}

impl<'a> State<'a> {
    fn new(instance: &'a Instance) -> Self {
        let n_v = instance.n_vehicles();
        Self {
            instance,
            r_max: max_limit(instance),
            lanes: vec![EMPTY; n_v],
            seqs: vec![Vec::new(); n_v],
            assigned: vec![false; instance.n_tasks() + 1],
            n_assigned: 0,
            undo: Vec::new(),
        }
    }

    fn extended(&self, task: usize, vehicle: usize) -> Lane {
        let inst = self.instance;
        let lane = self.lanes[vehicle];
        let limit = inst.revisit_limit(task);
        let inner = if lane.len == 0 { 0.0 } else { lane.inner + inst.cost(lane.last, task) };
        Lane {
            first: if lane.len == 0 { task } else { lane.first },
            last: task,
            inner,
            delivery: inner + inst.cost(task, DEPOT),
            min_limit: lane.min_limit.min(limit.unwrap_or(f64::INFINITY)),
            n_t: lane.n_t + usize::from(limit.is_some()),
            len: lane.len + 1,
        }
    }

    fn child(&self, task: usize, vehicle: usize) -> Option<Child> {
        let lane = self.extended(task, vehicle);
        let length = self.instance.cost(DEPOT, lane.first) + lane.delivery;
        if length > lane.min_limit + FEASIBILITY_TOL {
            return None;
        }
        let others = self
            .lanes
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != vehicle)
            .map(|(_, l)| l.delivery)
            .fold(0.0, f64::max);
        let cost = lane.delivery.max(others);
        let s1 = match (self.instance.revisit_limit(task), self.r_max) {
            (Some(r), Some(r_max)) => r / r_max,
            _ => 1.0,
        };
        let s2 = 10f64.powi(-(lane.n_t as i32));
        Some(Child { task, vehicle, cost, scaled: s1 * s2 * cost })
    }

    fn children(&self) -> Vec<Child> {
        let n = self.instance.n_tasks();
        // identical vehicles: only the lowest empty one is offered
        let first_empty = self.lanes.iter().position(|l| l.len == 0);
        let vehicles: Vec<usize> =
            (0..self.lanes.len()).filter(|&v| self.lanes[v].len > 0 || Some(v) == first_empty).collect();
        let mut out: Vec<Child> = (1..=n)
            .filter(|&t| !self.assigned[t])
            .flat_map(|t| vehicles.iter().filter_map(move |&v| self.child(t, v)))
            .collect();
        out.sort_by(|a, b| a.scaled.total_cmp(&b.scaled).then(a.task.cmp(&b.task)).then(a.vehicle.cmp(&b.vehicle)));
        out
    }

    fn apply(&mut self, c: &Child) {
        self.undo.push((c.task, c.vehicle, self.lanes[c.vehicle]));
        self.lanes[c.vehicle] = self.extended(c.task, c.vehicle);
        self.seqs[c.vehicle].push(c.task);
        self.assigned[c.task] = true;
        self.n_assigned += 1;
    }

    fn revert(&mut self) {
        let (task, vehicle, lane) = self.undo.pop().expect("an applied child");
        self.lanes[vehicle] = lane;
        self.seqs[vehicle].pop();
        self.assigned[task] = false;
        self.n_assigned -= 1;
    }

    fn plan(&self) -> RoutePlan {
        RoutePlan::new(self.seqs.clone())
    }
}

struct Frame {
    children: Vec<Child>,
    next: usize,
}

pub fn tree_search(instance: &Instance, node_limit: u64) -> SearchResult {
    let start = Instant::now();
    let n = instance.n_tasks();
    let mut state = State::new(instance);
    let mut nodes: u64 = 1;
    let mut incumbent: Option<(RoutePlan, f64)> = None;
    let mut bfs: Option<(RoutePlan, u64, f64)> = None;
    let mut stack = vec![Frame { children: state.children(), next: 0 }];
    let mut hit_limit = false;

    while let Some(frame) = stack.last_mut() {
        let Some(&child) = frame.children.get(frame.next) else {
            stack.pop();
            if !stack.is_empty() {
                state.revert();
            }
            continue;
        };
        frame.next += 1;
        if incumbent.as_ref().is_some_and(|(_, best)| child.cost >= *best) {
            continue;
        }
        if nodes >= node_limit {
            hit_limit = true;
            break;
        }
        nodes += 1;
        state.apply(&child);
        trace!(
            "depth={} task={} vehicle={} cost={:.6} scaled={:.6}",
            state.n_assigned,
            child.task,
            child.vehicle,
            child.cost,
            child.scaled
        );
        if state.n_assigned == n {
            let plan = state.plan();
            if bfs.is_none() {
                bfs = Some((plan.clone(), nodes, start.elapsed().as_secs_f64()));
            }
            incumbent = Some((plan, child.cost));
            state.revert();
        } else {
            stack.push(Frame { children: state.children(), next: 0 });
        }
    }

    let z = |plan: &RoutePlan| evaluate_plan(instance, plan).expect("search plans cover every task").z;
    let status = match (&incumbent, hit_limit) {
        (_, true) => SearchStatus::NodeLimit,
        (None, false) => SearchStatus::NoFeasibleFound,
        (Some(_), false) => SearchStatus::Exhausted,
    };
    let (bfs_plan, bfs_nodes, bfs_time) = match bfs {
        Some((plan, nodes, time)) => (Some(plan), nodes, time),
        None => (None, 0, 0.0),
    };
    let final_plan = incumbent.map(|(plan, _)| plan);
    SearchResult {
        status,
        bfs_cost: bfs_plan.as_ref().map(z),
        bfs_plan,
        bfs_nodes,
        bfs_time,
        final_cost: final_plan.as_ref().map(z),
        final_plan,
        nodes_explored: nodes,
        total_time: start.elapsed().as_secs_f64(),
    }
}
