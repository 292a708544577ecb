//! Problem instances: task sites, depot, fleet size and revisit limits.
//!
//! Nodes are indexed `0..=n`, with [`DEPOT`] at index 0 and task `i` at
//! index `i`. Task ids are therefore contiguous `1..=n`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical;

/// Reserved node index of the depot.
pub const DEPOT: usize = 0;

/// Current version of the instance and plan file schemas.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("instance has no tasks")]
    NoTasks,
    #[error("fleet size must be at least 1")]
    NoVehicles,
    #[error("speed must be positive and finite, got {0}")]
    BadSpeed(f64),
    #[error("task ids must be contiguous 1..=n: position {position} holds id {id}")]
    BadTaskId { position: usize, id: usize },
    #[error("task {0} has a negative or non-finite service time")]
    BadServiceTime(usize),
    #[error("task {0} has non-finite coordinates")]
    BadCoordinate(usize),
    #[error("revisit limit for task {0} must be positive and finite")]
    BadRevisitLimit(usize),
    #[error("revisit limit refers to unknown task {0}")]
    UnknownTask(usize),
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("malformed instance file: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Seconds spent at the site.
    pub service: f64,
}

impl Task {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Parameters of the random generator that produced an instance, kept as
/// provenance in the instance file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub grid: f64,
    pub farthest: bool,
    pub nearest_k: usize,
    pub factor: f64,
}

/// Elapsed-time matrix over `V = {depot} ∪ T`.
///
/// `c[i][j]` is the travel time from `i` to `j` plus the service time of
/// `j` (zero for the depot). The diagonal is unused and stored as `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelMatrix {
    size: usize,
    cost: Vec<f64>,
}

impl TravelMatrix {
    pub fn from_fn(size: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut cost = vec![f64::INFINITY; size * size];
        for i in 0..size {
            for j in 0..size {
                if i != j {
                    cost[i * size + j] = f(i, j);
                }
            }
        }
        Self { size, cost }
    }

    /// Number of nodes, depot included.
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.cost[from * self.size + to]
    }
}

/// A validated problem instance. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    tasks: Vec<Task>,
    depot: Point,
    speed: f64,
    n_vehicles: usize,
    revisit_limits: BTreeMap<usize, f64>,
    seed: Option<u64>,
    generator: Option<GeneratorInfo>,
    travel: TravelMatrix,
}

impl Instance {
    pub fn new(
        tasks: Vec<Task>,
        depot: Point,
        speed: f64,
        n_vehicles: usize,
        revisit_limits: BTreeMap<usize, f64>,
    ) -> Result<Self, InstanceError> {
        if tasks.is_empty() {
            return Err(InstanceError::NoTasks);
        }
        if n_vehicles == 0 {
            return Err(InstanceError::NoVehicles);
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(InstanceError::BadSpeed(speed));
        }
        for (position, task) in tasks.iter().enumerate() {
            if task.id != position + 1 {
                return Err(InstanceError::BadTaskId { position, id: task.id });
            }
            if !(task.service >= 0.0 && task.service.is_finite()) {
                return Err(InstanceError::BadServiceTime(task.id));
            }
            if !(task.x.is_finite() && task.y.is_finite()) {
                return Err(InstanceError::BadCoordinate(task.id));
            }
        }
        for (&id, &limit) in &revisit_limits {
            if id == 0 || id > tasks.len() {
                return Err(InstanceError::UnknownTask(id));
            }
            if !(limit > 0.0 && limit.is_finite()) {
                return Err(InstanceError::BadRevisitLimit(id));
            }
        }
        let travel = build_travel_matrix(depot, &tasks, speed);
        Ok(Self {
            tasks,
            depot,
            speed,
            n_vehicles,
            revisit_limits,
            seed: None,
            generator: None,
            travel,
        })
    }

    pub(crate) fn with_provenance(mut self, seed: u64, generator: GeneratorInfo) -> Self {
        self.seed = Some(seed);
        self.generator = Some(generator);
        self
    }

    /// Number of tasks `n`.
    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_vehicles(&self) -> usize {
        self.n_vehicles
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, id: usize) -> &Task {
        &self.tasks[id - 1]
    }

    /// Task ids `1..=n`.
    pub fn task_ids(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.tasks.len()
    }

    pub fn depot(&self) -> Point {
        self.depot
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn generator(&self) -> Option<&GeneratorInfo> {
        self.generator.as_ref()
    }

    pub fn travel(&self) -> &TravelMatrix {
        &self.travel
    }

    /// Shorthand for `travel().get(from, to)`.
    #[inline]
    pub fn cost(&self, from: usize, to: usize) -> f64 {
        self.travel.get(from, to)
    }

    /// Location of node `node` (depot for index 0).
    pub fn position(&self, node: usize) -> Point {
        if node == DEPOT {
            self.depot
        } else {
            self.tasks[node - 1].position()
        }
    }

    /// Revisit limit of a task, `None` when unconstrained.
    pub fn revisit_limit(&self, id: usize) -> Option<f64> {
        self.revisit_limits.get(&id).copied()
    }

    /// Revisit limit with `+∞` for unconstrained tasks.
    pub fn limit_or_inf(&self, id: usize) -> f64 {
        self.revisit_limit(id).unwrap_or(f64::INFINITY)
    }

    pub fn revisit_limits(&self) -> &BTreeMap<usize, f64> {
        &self.revisit_limits
    }

    /// Same instance with a different set of revisit limits.
    pub fn with_revisit_limits(
        &self,
        revisit_limits: BTreeMap<usize, f64>,
    ) -> Result<Self, InstanceError> {
        let mut out = Instance::new(
            self.tasks.clone(),
            self.depot,
            self.speed,
            self.n_vehicles,
            revisit_limits,
        )?;
        out.seed = self.seed;
        out.generator = self.generator.clone();
        Ok(out)
    }

    /// Same instance with a different fleet size.
    pub fn with_vehicles(&self, n_vehicles: usize) -> Result<Self, InstanceError> {
        if n_vehicles == 0 {
            return Err(InstanceError::NoVehicles);
        }
        let mut out = self.clone();
        out.n_vehicles = n_vehicles;
        Ok(out)
    }

    /// Canonical JSON text: sorted keys, floats with six decimals.
    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            version: FORMAT_VERSION,
            seed: self.seed,
            speed: self.speed,
            depot: self.depot,
            tasks: self.tasks.clone(),
            n_v: self.n_vehicles,
            revisit_limits: self
                .revisit_limits
                .iter()
                .map(|(id, r)| (id.to_string(), *r))
                .collect(),
            generator: self.generator.clone(),
        };
        let value = serde_json::to_value(&file).expect("instance serializes");
        canonical::to_string(&value)
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(InstanceError::BadVersion(file.version));
        }
        let mut limits = BTreeMap::new();
        for (key, r) in file.revisit_limits {
            let id: usize = key
                .parse()
                .map_err(|_| InstanceError::Json(format!("bad task id key {key:?}")))?;
            limits.insert(id, r);
        }
        let mut instance = Instance::new(file.tasks, file.depot, file.speed, file.n_v, limits)?;
        instance.seed = file.seed;
        instance.generator = file.generator;
        Ok(instance)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `c[i][j] = |p_i - p_j| / speed + service(j)`, with zero service at the depot.
pub fn build_travel_matrix(depot: Point, tasks: &[Task], speed: f64) -> TravelMatrix {
    let position = |node: usize| {
        if node == DEPOT {
            depot
        } else {
            tasks[node - 1].position()
        }
    };
    let service = |node: usize| if node == DEPOT { 0.0 } else { tasks[node - 1].service };
    TravelMatrix::from_fn(tasks.len() + 1, |i, j| {
        position(i).dist(position(j)) / speed + service(j)
    })
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    speed: f64,
    depot: Point,
    tasks: Vec<Task>,
    n_v: usize,
    #[serde(default)]
    revisit_limits: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<GeneratorInfo>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(id: usize, x: f64, y: f64, service: f64) -> Task {
        Task { id, x, y, service }
    }

    #[test]
    fn three_four_five() {
        let inst = Instance::new(
            vec![task(1, 3.0, 4.0, 0.0)],
            Point::new(0.0, 0.0),
            1.0,
            1,
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(inst.cost(DEPOT, 1), 5.0);
        assert_eq!(inst.cost(1, DEPOT), 5.0);
        assert!(inst.cost(1, 1).is_infinite());
    }

    #[test]
    fn service_added_at_head_only() {
        let inst = Instance::new(
            vec![task(1, 3.0, 4.0, 2.0)],
            Point::new(0.0, 0.0),
            1.0,
            1,
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(inst.cost(DEPOT, 1), 7.0);
        assert_eq!(inst.cost(1, DEPOT), 5.0);
    }

    #[test]
    fn speed_divides_distance() {
        let inst = Instance::new(
            vec![task(1, 1.0, 0.0, 0.0), task(2, 1.0, 1.0, 0.0)],
            Point::new(0.0, 0.0),
            2.0,
            1,
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(inst.cost(1, 2), 0.5);
    }

    #[test]
    fn asymmetry_comes_from_service_only() {
        let inst = Instance::new(
            vec![task(1, 1.0, 7.0, 3.5), task(2, -4.0, 2.0, 1.25), task(3, 9.0, -1.0, 0.0)],
            Point::new(0.5, 0.5),
            1.7,
            2,
            BTreeMap::new(),
        )
        .unwrap();
        let service = |n: usize| if n == 0 { 0.0 } else { inst.task(n).service };
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let a = inst.cost(i, j) - service(j);
                    let b = inst.cost(j, i) - service(i);
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn validation_errors() {
        let depot = Point::new(0.0, 0.0);
        let none = BTreeMap::new();
        assert_eq!(
            Instance::new(vec![], depot, 1.0, 1, none.clone()).unwrap_err(),
            InstanceError::NoTasks
        );
        assert_eq!(
            Instance::new(vec![task(1, 0.0, 1.0, 0.0)], depot, 1.0, 0, none.clone()).unwrap_err(),
            InstanceError::NoVehicles
        );
        assert_eq!(
            Instance::new(vec![task(1, 0.0, 1.0, 0.0)], depot, 0.0, 1, none.clone()).unwrap_err(),
            InstanceError::BadSpeed(0.0)
        );
        assert_eq!(
            Instance::new(vec![task(2, 0.0, 1.0, 0.0)], depot, 1.0, 1, none.clone()).unwrap_err(),
            InstanceError::BadTaskId { position: 0, id: 2 }
        );
        assert_eq!(
            Instance::new(vec![task(1, 0.0, 1.0, -1.0)], depot, 1.0, 1, none).unwrap_err(),
            InstanceError::BadServiceTime(1)
        );
        let bad_limit = BTreeMap::from([(1, 0.0)]);
        assert_eq!(
            Instance::new(vec![task(1, 0.0, 1.0, 0.0)], depot, 1.0, 1, bad_limit).unwrap_err(),
            InstanceError::BadRevisitLimit(1)
        );
        let unknown = BTreeMap::from([(5, 10.0)]);
        assert_eq!(
            Instance::new(vec![task(1, 0.0, 1.0, 0.0)], depot, 1.0, 1, unknown).unwrap_err(),
            InstanceError::UnknownTask(5)
        );
    }

    #[test]
    fn json_round_trip_is_canonical() {
        let inst = Instance::new(
            vec![task(1, 3.0, 4.0, 0.0), task(2, 10.5, -2.25, 1.0)],
            Point::new(0.0, 0.0),
            1.0,
            2,
            BTreeMap::from([(2, 40.0)]),
        )
        .unwrap();
        let text = inst.to_json();
        assert!(text.contains("\"x\": 10.500000"));
        assert!(text.contains("\"n_v\": 2"));
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.hash(), inst.hash());
    }

    #[test]
    fn rejects_unknown_version() {
        let inst = Instance::new(
            vec![task(1, 3.0, 4.0, 0.0)],
            Point::new(0.0, 0.0),
            1.0,
            1,
            BTreeMap::new(),
        )
        .unwrap();
        let text = inst.to_json().replace("\"version\": 1", "\"version\": 9");
        assert_eq!(Instance::from_json(&text).unwrap_err(), InstanceError::BadVersion(9));
    }
}
