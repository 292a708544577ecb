//! LP-based branch-and-bound for the routing models.
//!
//! Nodes are selected by best bound, ties going to the deeper node and
//! then to the older one. Branching fixes the most fractional binary to 0
//! and to 1; both children are solved as soon as their parent is branched.
//! One LP tableau is kept for the whole search and re-solved under each
//! node's bounds with the dual simplex. An integral relaxation
//! becomes the incumbent only after its arcs decode to a plan that
//! evaluates feasible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::instance::Instance;
use crate::lp::{LpBasis, LpEngine, LpOptions, LpStatus};
use crate::milp::{plan_from_edges, ArcValues, MilpModel, VarKind};
use crate::plan::{evaluate_plan, RoutePlan};

/// Distance from an integer below which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Open nodes beyond this count do not keep their LP basis.
const STORED_BASES: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnbStatus {
    Optimal,
    /// Time limit reached with an incumbent.
    FeasibleTimeout,
    /// Time limit reached without an incumbent.
    TimeLimit,
    Infeasible,
    NodeLimit,
}

impl BnbStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BnbStatus::Optimal => "optimal",
            BnbStatus::FeasibleTimeout => "feasible_timeout",
            BnbStatus::TimeLimit => "time_limit",
            BnbStatus::Infeasible => "infeasible",
            BnbStatus::NodeLimit => "node_limit",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BnbConfig {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
    pub gap_tol: f64,
    /// Explore depth-first instead of best-first.
    pub depth_first: bool,
    /// Known feasible plan used as the starting incumbent.
    pub initial_plan: Option<RoutePlan>,
    pub lp: LpOptions,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            time_limit: None,
            node_limit: None,
            gap_tol: 1e-6,
            depth_first: false,
            initial_plan: None,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BnbResult {
    pub status: BnbStatus,
    pub incumbent_objective: Option<f64>,
    pub incumbent_plan: Option<RoutePlan>,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes_explored: u64,
    pub lp_iterations: u64,
    pub wall_time: f64,
    /// `node=<n> bound=<b> incumbent=<z> gap=<g>` lines, one per incumbent
    /// improvement plus a closing line.
    pub progress: Vec<String>,
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

#[derive(Clone, Debug)]
struct Node {
    id: u64,
    depth: usize,
    bound: f64,
    /// `(variable, value)` fixings on the path from the root.
    fixings: Vec<(usize, bool)>,
    /// Variable to branch on next.
    branch_var: usize,
    /// Optimal basis of this node's relaxation; its children start here.
    basis: Option<LpBasis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Max-heap order: the best node compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

enum Outcome {
    Infeasible,
    Integral { plan: RoutePlan, z: f64 },
    Fractional { bound: f64, branch_var: usize },
}

struct Evaluated {
    outcome: Outcome,
    iterations: usize,
    basis: Option<LpBasis>,
}

struct Solver<'a> {
    model: &'a MilpModel,
    engine: LpEngine<'a>,
    instance: &'a Instance,
    binaries: Vec<usize>,
    base_bounds: Vec<(f64, f64)>,
}

impl Solver<'_> {
    fn evaluate(&mut self, start: Option<&LpBasis>, fixings: &[(usize, bool)], parent_bound: f64) -> Evaluated {
        let mut bounds = self.base_bounds.clone();
        for &(var, up) in fixings {
            let v = if up { 1.0 } else { 0.0 };
            bounds[var] = (v, v);
        }
        let lp = self.engine.solve_from(start, &bounds);
        let iterations = lp.iterations;
        let outcome = match lp.status {
            LpStatus::Infeasible => Outcome::Infeasible,
            LpStatus::Optimal => self.classify(&lp.values, lp.objective.max(parent_bound), &bounds),
            LpStatus::Unbounded | LpStatus::IterationLimit => {
                // no usable bound: inherit the parent's and branch on the
                // first free binary
                warn!("node relaxation ended with status {}", lp.status.as_str());
                match self.binaries.iter().find(|&&j| bounds[j].0 < bounds[j].1) {
                    Some(&j) => Outcome::Fractional { bound: parent_bound, branch_var: j },
                    None => Outcome::Infeasible,
                }
            }
        };
        let basis = match outcome {
            Outcome::Fractional { .. } => self.engine.basis(),
            _ => None,
        };
        Evaluated { outcome, iterations, basis }
    }

    fn classify(&self, values: &[f64], bound: f64, bounds: &[(f64, f64)]) -> Outcome {
        let mut most: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let frac = (values[j] - values[j].floor()).min(values[j].ceil() - values[j]);
            if frac > INTEGRALITY_TOL && most.is_none_or(|(_, f)| frac > f + 1e-12) {
                most = Some((j, frac));
            }
        }
        if let Some((j, _)) = most {
            return Outcome::Fractional { bound, branch_var: j };
        }
        let nodes = self.instance.n_tasks() + 1;
        let decoded = ArcValues::from_solution(self.model, nodes, values)
            .ok()
            .and_then(|x| plan_from_edges(self.instance, &x).ok())
            .and_then(|plan| {
                let metrics = evaluate_plan(self.instance, &plan).ok()?;
                metrics.feasible.then_some((plan, metrics.z))
            });
        match decoded {
            Some((plan, z)) => Outcome::Integral { plan, z },
            None => {
                // integral within tolerance but not a valid plan: keep
                // branching on the binary farthest from integrality
                debug!("integral relaxation failed decode validation");
                let free = self.binaries.iter().copied().filter(|&j| bounds[j].0 < bounds[j].1);
                match free.max_by(|&a, &b| {
                    let fa = (values[a] - values[a].round()).abs();
                    let fb = (values[b] - values[b].round()).abs();
                    fa.total_cmp(&fb).then(b.cmp(&a))
                }) {
                    Some(j) => Outcome::Fractional { bound, branch_var: j },
                    None => Outcome::Infeasible,
                }
            }
        }
    }
}

/// Frontier of open nodes, best-first or depth-first.
enum Frontier {
    Best(BinaryHeap<Node>),
    Depth(Vec<Node>),
}

impl Frontier {
    fn push(&mut self, node: Node) {
        match self {
            Frontier::Best(heap) => heap.push(node),
            Frontier::Depth(stack) => stack.push(node),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Frontier::Best(heap) => heap.pop(),
            Frontier::Depth(stack) => stack.pop(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Frontier::Best(heap) => heap.len(),
            Frontier::Depth(stack) => stack.len(),
        }
    }

    fn best_bound(&self) -> Option<f64> {
        match self {
            Frontier::Best(heap) => heap.peek().map(|n| n.bound),
            Frontier::Depth(stack) => stack.iter().map(|n| n.bound).min_by(f64::total_cmp),
        }
    }
}

pub fn solve_milp(model: &MilpModel, instance: &Instance, config: &BnbConfig) -> BnbResult {
    let start = Instant::now();
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let base_bounds: Vec<(f64, f64)> = model.variables().iter().map(|v| (v.lower, v.upper)).collect();
    let engine = LpEngine::new(model, config.lp);
    let mut solver = Solver { model, engine, instance, binaries, base_bounds };

    let mut incumbent: Option<(RoutePlan, f64)> = None;
    if let Some(plan) = &config.initial_plan {
        match evaluate_plan(instance, plan) {
            Ok(m) if m.feasible => incumbent = Some((plan.clone(), m.z)),
            _ => warn!("initial plan is not feasible and is ignored"),
        }
    }
    let mut frontier =
        if config.depth_first { Frontier::Depth(Vec::new()) } else { Frontier::Best(BinaryHeap::new()) };
    let mut progress = Vec::new();
    let mut nodes: u64 = 0;
    let mut lp_iterations: u64 = 0;
    let mut next_id: u64 = 0;
    let mut last_bound = f64::NEG_INFINITY;
    let mut reported: Option<f64> = None;

    let cutoff = |incumbent: &Option<(RoutePlan, f64)>, bound: f64| match incumbent {
        Some((_, z)) => relative_gap(*z, bound) <= config.gap_tol,
        None => false,
    };
    let mut admit = |eval: Evaluated,
                     fixings: Vec<(usize, bool)>,
                     depth: usize,
                     incumbent: &mut Option<(RoutePlan, f64)>,
                     frontier: &mut Frontier,
                     nodes: &mut u64,
                     lp_iterations: &mut u64| {
        *nodes += 1;
        *lp_iterations += eval.iterations as u64;
        match eval.outcome {
            Outcome::Infeasible => {}
            Outcome::Integral { plan, z } => {
                if incumbent.as_ref().is_none_or(|(_, best)| z < *best - 1e-9) {
                    debug!("new incumbent {z} at node {nodes}");
                    *incumbent = Some((plan, z));
                }
            }
            Outcome::Fractional { bound, branch_var } => {
                if !cutoff(incumbent, bound) {
                    next_id += 1;
                    let basis = eval.basis.filter(|_| frontier.len() < STORED_BASES);
                    frontier.push(Node { id: next_id, depth, bound, fixings, branch_var, basis });
                }
            }
        }
    };

    let root = solver.evaluate(None, &[], f64::NEG_INFINITY);
    admit(root, Vec::new(), 0, &mut incumbent, &mut frontier, &mut nodes, &mut lp_iterations);

    let mut stopped: Option<BnbStatus> = None;
    loop {
        let open_bound = frontier.best_bound();
        let bound = match (open_bound, &incumbent) {
            (Some(b), Some((_, z))) => b.min(*z),
            (Some(b), None) => b,
            (None, Some((_, z))) => *z,
            (None, None) => f64::INFINITY,
        };
        last_bound = last_bound.max(bound);
        let value = incumbent.as_ref().map(|i| i.1);
        if value != reported {
            reported = value;
            let line = progress_line(nodes, last_bound, value);
            info!("{line}");
            progress.push(line);
        }
        let Some(node) = frontier.pop() else { break };
        if cutoff(&incumbent, node.bound) {
            if !config.depth_first {
                // every remaining node has a bound at least as large
                frontier = Frontier::Best(BinaryHeap::new());
            }
            continue;
        }
        if config.node_limit.is_some_and(|limit| nodes + 2 > limit) {
            frontier.push(node);
            stopped = Some(BnbStatus::NodeLimit);
            break;
        }
        if config.time_limit.is_some_and(|limit| start.elapsed() >= limit) {
            frontier.push(node);
            stopped =
                Some(if incumbent.is_some() { BnbStatus::FeasibleTimeout } else { BnbStatus::TimeLimit });
            break;
        }

        let mut down = node.fixings.clone();
        down.push((node.branch_var, false));
        let mut up = node.fixings;
        up.push((node.branch_var, true));
        let eval_down = solver.evaluate(node.basis.as_ref(), &down, node.bound);
        let eval_up = solver.evaluate(node.basis.as_ref(), &up, node.bound);
        let depth = node.depth + 1;
        // depth-first pops the up branch first
        admit(eval_down, down, depth, &mut incumbent, &mut frontier, &mut nodes, &mut lp_iterations);
        admit(eval_up, up, depth, &mut incumbent, &mut frontier, &mut nodes, &mut lp_iterations);
    }

    let open_bound = frontier.best_bound();
    let (status, best_bound) = match (stopped, &incumbent) {
        (Some(status), Some((_, z))) => (status, open_bound.map_or(*z, |b| b.min(*z))),
        (Some(status), None) => (status, open_bound.unwrap_or(f64::INFINITY)),
        (None, Some((_, z))) => (BnbStatus::Optimal, open_bound.map_or(*z, |b| b.min(*z))),
        (None, None) => (BnbStatus::Infeasible, f64::INFINITY),
    };
    let best_bound = best_bound.max(last_bound.min(incumbent.as_ref().map_or(f64::INFINITY, |i| i.1)));
    let gap = incumbent.as_ref().map_or(f64::INFINITY, |(_, z)| relative_gap(*z, best_bound));
    let line = progress_line(nodes, best_bound, incumbent.as_ref().map(|i| i.1));
    if progress.last() != Some(&line) {
        info!("{line}");
        progress.push(line);
    }
    BnbResult {
        status,
        incumbent_objective: incumbent.as_ref().map(|i| i.1),
        incumbent_plan: incumbent.map(|i| i.0),
        best_bound,
        gap,
        nodes_explored: nodes,
        lp_iterations,
        wall_time: start.elapsed().as_secs_f64(),
        progress,
    }
}

fn progress_line(nodes: u64, bound: f64, incumbent: Option<f64>) -> String {
    match incumbent {
        Some(z) => format!(
            "node={nodes} bound={bound:.6} incumbent={z:.6} gap={:.6}",
            relative_gap(z, bound)
        ),
        None => format!("node={nodes} bound={bound:.6} incumbent=none gap=inf"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_instance, ConstraintPolicy, GeneratorConfig};
    use crate::instance::{Point, Task};
    use crate::milp::{build_f1, build_f3};
    use crate::oracle::brute_force_solve;
    use std::collections::BTreeMap;

    #[test]
    fn single_task_is_solved_at_the_root() {
        let tasks = vec![Task { id: 1, x: 3.0, y: 4.0, service: 0.0 }];
        let inst = Instance::new(tasks, Point::new(0.0, 0.0), 1.0, 1, BTreeMap::new()).unwrap();
        let res = solve_milp(&build_f1(&inst), &inst, &BnbConfig::default());
        assert_eq!(res.status, BnbStatus::Optimal);
        assert_eq!(res.nodes_explored, 1);
        assert!((res.incumbent_objective.unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn agrees_with_oracle() {
        let cfg = GeneratorConfig::new(6, 2).with_policy(ConstraintPolicy::protocol(6));
        let inst = generate_instance(3, &cfg).unwrap();
        let oracle = brute_force_solve(&inst).unwrap();
        for model in [build_f1(&inst), build_f3(&inst)] {
            let res = solve_milp(&model, &inst, &BnbConfig::default());
            match oracle.objective {
                Some(z) => {
                    assert_eq!(res.status, BnbStatus::Optimal);
                    assert!((res.incumbent_objective.unwrap() - z).abs() < 1e-6);
                }
                None => assert_eq!(res.status, BnbStatus::Infeasible),
            }
        }
    }

    #[test]
    fn unreachable_limit_is_infeasible() {
        let tasks = vec![
            Task { id: 1, x: 3.0, y: 0.0, service: 0.0 },
            Task { id: 2, x: 0.0, y: 2.0, service: 0.0 },
        ];
        let inst = Instance::new(tasks, Point::new(0.0, 0.0), 1.0, 2, BTreeMap::from([(1, 5.0)])).unwrap();
        for model in [build_f1(&inst), build_f3(&inst)] {
            let res = solve_milp(&model, &inst, &BnbConfig::default());
            assert_eq!(res.status, BnbStatus::Infeasible);
            assert!(res.incumbent_plan.is_none());
        }
    }

    #[test]
    fn progress_lines_are_recorded() {
        let cfg = GeneratorConfig::new(6, 4).with_policy(ConstraintPolicy::protocol(6));
        let inst = generate_instance(11, &cfg).unwrap();
        let res = solve_milp(&build_f3(&inst), &inst, &BnbConfig::default());
        assert_eq!(res.status, BnbStatus::Optimal);
        assert!(!res.progress.is_empty());
        let values: Vec<f64> = res
            .progress
            .iter()
            .filter_map(|l| l.split("incumbent=").nth(1)?.split(' ').next()?.parse().ok())
            .collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.progress.last().unwrap().contains(&format!("incumbent={:.6}", res.incumbent_objective.unwrap())));
        assert!(res.progress.iter().all(|l| l.starts_with("node=") && l.contains(" gap=")));
    }

    #[test]
    fn node_limit_is_reported() {
        let cfg = GeneratorConfig::new(7, 2).with_policy(ConstraintPolicy::protocol(7));
        let inst = generate_instance(5, &cfg).unwrap();
        let config = BnbConfig { node_limit: Some(3), ..BnbConfig::default() };
        let res = solve_milp(&build_f1(&inst), &inst, &config);
        if res.status != BnbStatus::Optimal {
            assert_eq!(res.status, BnbStatus::NodeLimit);
            assert!(res.nodes_explored <= 3);
        }
    }

    #[test]
    fn depth_first_agrees_with_best_first() {
        let cfg = GeneratorConfig::new(5, 2).with_policy(ConstraintPolicy::protocol(5));
        let inst = generate_instance(21, &cfg).unwrap();
        let model = build_f3(&inst);
        let best = solve_milp(&model, &inst, &BnbConfig::default());
        let depth = solve_milp(&model, &inst, &BnbConfig { depth_first: true, ..BnbConfig::default() });
        assert_eq!(best.status, depth.status);
        if let (Some(a), Some(b)) = (best.incumbent_objective, depth.incumbent_objective) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
