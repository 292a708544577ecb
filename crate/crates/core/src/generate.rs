//! Seeded random instance generation.
//!
//! Task coordinates are drawn i.i.d. uniform on `[0, grid]²` from a
//! Xoshiro256++ stream seeded through SplitMix64 (`seed_from_u64`); each
//! coordinate uses one 64-bit draw mapped to `[0, 1)` as
//! `(draw >> 11) * 2^-53`. All stored values are rounded to six decimals so
//! an instance and its canonical file are bit-identical.
//!
//! Revisit limits follow two rules:
//! * the task with the largest depot round trip gets `factor * (c_di + c_id)`,
//! * the `nearest_k` tasks closest to the depot share
//!   `factor * TSP(depot + those tasks)`. The farthest task is never one of
//!   them.

use std::collections::BTreeMap;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::canonical::round6;
use crate::instance::{GeneratorInfo, Instance, InstanceError, Point, Task, DEPOT};
use crate::tsp::{tsp_exact, TSP_EXACT_CAP};

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error("bad constraint policy: {0}")]
    BadPolicy(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintPolicy {
    pub farthest: bool,
    pub nearest_k: usize,
    pub factor: f64,
}

impl ConstraintPolicy {
    /// Farthest task plus `1 + n/10` nearest tasks: 2, 3 and 4 nearest
    /// tasks for 10, 20 and 30 tasks.
    pub fn protocol(n_tasks: usize) -> Self {
        Self {
            farthest: true,
            nearest_k: (1 + n_tasks / 10).min(n_tasks.saturating_sub(1)),
            factor: 1.1,
        }
    }

    pub fn unconstrained() -> Self {
        Self { farthest: false, nearest_k: 0, factor: 1.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub n_tasks: usize,
    pub n_vehicles: usize,
    pub grid: f64,
    pub policy: ConstraintPolicy,
    /// Defaults to the grid center.
    pub depot: Option<Point>,
}

impl GeneratorConfig {
    pub fn new(n_tasks: usize, n_vehicles: usize) -> Self {
        Self {
            n_tasks,
            n_vehicles,
            grid: 4000.0,
            policy: ConstraintPolicy::protocol(n_tasks),
            depot: None,
        }
    }

    pub fn with_policy(mut self, policy: ConstraintPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_grid(mut self, grid: f64) -> Self {
        self.grid = grid;
        self
    }
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one `u64`.
fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn generate_instance(seed: u64, config: &GeneratorConfig) -> Result<Instance, GenerateError> {
    let policy = &config.policy;
    let n = config.n_tasks;
    if policy.nearest_k + 1 > TSP_EXACT_CAP {
        return Err(GenerateError::BadPolicy(format!(
            "nearest_k = {} exceeds the exact TSP cap of {} tasks",
            policy.nearest_k,
            TSP_EXACT_CAP - 1
        )));
    }
    if policy.nearest_k + usize::from(policy.farthest) > n {
        return Err(GenerateError::BadPolicy(format!(
            "{} constrained tasks requested but instance has {n}",
            policy.nearest_k + usize::from(policy.farthest)
        )));
    }
    if !(policy.factor > 0.0 && policy.factor.is_finite()) {
        return Err(GenerateError::BadPolicy(format!("factor must be positive, got {}", policy.factor)));
    }
    if !(config.grid > 0.0 && config.grid.is_finite()) {
        return Err(GenerateError::BadPolicy(format!("grid must be positive, got {}", config.grid)));
    }

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(n);
    for id in 1..=n {
        let x = round6(config.grid * unit(&mut rng));
        let y = round6(config.grid * unit(&mut rng));
        tasks.push(Task { id, x, y, service: 0.0 });
    }
    let depot = config
        .depot
        .unwrap_or_else(|| Point::new(config.grid / 2.0, config.grid / 2.0));
    let depot = Point::new(round6(depot.x), round6(depot.y));

    let base = Instance::new(tasks, depot, 1.0, config.n_vehicles, BTreeMap::new())?;
    let mut limits = BTreeMap::new();

    let mut farthest = None;
    if policy.farthest {
        let round_trip = |i: usize| base.cost(DEPOT, i) + base.cost(i, DEPOT);
        let far = base
            .task_ids()
            .fold(1, |best, i| if round_trip(i) > round_trip(best) { i } else { best });
        limits.insert(far, round6(policy.factor * round_trip(far)));
        farthest = Some(far);
    }

    if policy.nearest_k > 0 {
        let mut by_distance: Vec<usize> =
            base.task_ids().filter(|&i| Some(i) != farthest).collect();
        by_distance.sort_by(|&a, &b| {
            let da = depot.dist(base.task(a).position());
            let db = depot.dist(base.task(b).position());
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let mut nodes = vec![DEPOT];
        nodes.extend(&by_distance[..policy.nearest_k]);
        let (_, cost) = tsp_exact(&nodes, base.travel())
            .map_err(|e| GenerateError::BadPolicy(e.to_string()))?;
        let limit = round6(policy.factor * cost);
        for &task in &nodes[1..] {
            limits.insert(task, limit);
        }
    }

    let info = GeneratorInfo {
        grid: config.grid,
        farthest: policy.farthest,
        nearest_k: policy.nearest_k,
        factor: policy.factor,
    };
    Ok(base.with_revisit_limits(limits)?.with_provenance(seed, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_bytes() {
        let config = GeneratorConfig::new(10, 4);
        let a = generate_instance(7, &config).unwrap().to_json();
        let b = generate_instance(7, &config).unwrap().to_json();
        assert_eq!(a, b);
        let c = generate_instance(8, &config).unwrap().to_json();
        assert_ne!(a, c);
    }

    #[test]
    fn file_round_trip_is_exact() {
        let inst = generate_instance(11, &GeneratorConfig::new(12, 3)).unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn protocol_constraint_counts() {
        for (n, expected) in [(10, 3), (20, 4), (30, 5)] {
            let inst = generate_instance(3, &GeneratorConfig::new(n, 4)).unwrap();
            assert_eq!(inst.revisit_limits().len(), expected, "n = {n}");
        }
    }

    #[test]
    fn farthest_rule() {
        let policy = ConstraintPolicy { farthest: true, nearest_k: 0, factor: 1.1 };
        let inst = generate_instance(5, &GeneratorConfig::new(9, 2).with_policy(policy)).unwrap();
        let (&far, &limit) = inst.revisit_limits().iter().next().unwrap();
        let trip = inst.cost(DEPOT, far) + inst.cost(far, DEPOT);
        for i in inst.task_ids() {
            assert!(inst.cost(DEPOT, i) + inst.cost(i, DEPOT) <= trip);
        }
        assert!((limit - 1.1 * trip).abs() <= 5e-7);
    }

    #[test]
    fn farthest_at_distance_1000() {
        // a single task at distance 1000 from the depot
        let config = GeneratorConfig {
            n_tasks: 1,
            n_vehicles: 1,
            grid: 1.0,
            policy: ConstraintPolicy { farthest: true, nearest_k: 0, factor: 1.1 },
            depot: Some(Point::new(-999.5, 0.5)),
        };
        let inst = generate_instance(1, &config).unwrap();
        let d = inst.cost(DEPOT, 1);
        let expected = round6(1.1 * 2.0 * d);
        assert_eq!(inst.revisit_limit(1), Some(expected));
        // exact arithmetic check on a hand-built instance
        let t = Task { id: 1, x: 1000.0, y: 0.0, service: 0.0 };
        let hand = Instance::new(vec![t], Point::new(0.0, 0.0), 1.0, 1, BTreeMap::new()).unwrap();
        assert!((1.1 * (hand.cost(0, 1) + hand.cost(1, 0)) - 2200.0).abs() < 1e-9);
    }

    #[test]
    fn nearest_share_tsp_limit_and_skip_farthest() {
        let inst = generate_instance(21, &GeneratorConfig::new(8, 3)).unwrap();
        let limits = inst.revisit_limits();
        assert_eq!(limits.len(), 2);
        // n = 8: one nearest task plus the farthest one
        let far = inst
            .task_ids()
            .max_by(|&a, &b| {
                let ta = inst.cost(0, a) + inst.cost(a, 0);
                let tb = inst.cost(0, b) + inst.cost(b, 0);
                ta.total_cmp(&tb).then(b.cmp(&a))
            })
            .unwrap();
        assert!(limits.contains_key(&far));
        let near = *limits.keys().find(|&&k| k != far).unwrap();
        let expected = round6(1.1 * (inst.cost(0, near) + inst.cost(near, 0)));
        assert_eq!(limits[&near], expected);
    }

    #[test]
    fn bad_policy() {
        let policy = ConstraintPolicy { farthest: false, nearest_k: 10, factor: 1.1 };
        let err = generate_instance(1, &GeneratorConfig::new(20, 2).with_policy(policy));
        assert!(matches!(err, Err(GenerateError::BadPolicy(_))));
        let policy = ConstraintPolicy { farthest: true, nearest_k: 3, factor: 1.1 };
        let err = generate_instance(1, &GeneratorConfig::new(3, 2).with_policy(policy));
        assert!(matches!(err, Err(GenerateError::BadPolicy(_))));
    }

    #[test]
    fn depot_defaults_to_center() {
        let inst = generate_instance(2, &GeneratorConfig::new(5, 2)).unwrap();
        assert_eq!(inst.depot(), Point::new(2000.0, 2000.0));
        for t in inst.tasks() {
            assert!((0.0..=4000.0).contains(&t.x) && (0.0..=4000.0).contains(&t.y));
        }
    }
}
