use thiserror::Error;

use crate::instance::{Instance, DEPOT};
use crate::plan::RoutePlan;

use super::MilpModel;

/// Integrality slack when reading arc variables.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("arc ({from}, {to}) has non-integral value {value}")]
    NonIntegral { from: usize, to: usize, value: f64 },
    #[error("selected arcs form a cycle that misses the depot: {tasks:?}")]
    SubtourDetected { tasks: Vec<usize> },
    #[error("task {node} has {outgoing} outgoing and {incoming} incoming arcs")]
    BadDegree { node: usize, outgoing: usize, incoming: usize },
    #[error("{cycles} cycles leave the depot but only {vehicles} vehicles exist")]
    TooManyCycles { cycles: usize, vehicles: usize },
    #[error("model has no arc variable for ({0}, {1})")]
    MissingArc(usize, usize),
}

/// Dense table of arc values over `V × V`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcValues {
    nodes: usize,
    values: Vec<f64>,
}

impl ArcValues {
    pub fn zeros(nodes: usize) -> Self {
        Self { nodes, values: vec![0.0; nodes * nodes] }
    }

    pub fn from_arcs(nodes: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut out = Self::zeros(nodes);
        for (i, j) in arcs {
            out.set(i, j, 1.0);
        }
        out
    }

    /// Reads the `x` variables of a routing model out of a solution vector.
    pub fn from_solution(model: &MilpModel, nodes: usize, values: &[f64]) -> Result<Self, DecodeError> {
        let mut out = Self::zeros(nodes);
        for i in 0..nodes {
            for j in 0..nodes {
                if i != j {
                    let k = model.index().x(i, j).ok_or(DecodeError::MissingArc(i, j))?;
                    out.set(i, j, values[k]);
                }
            }
        }
        Ok(out)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nodes + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.nodes + j] = value;
    }
}

/// Rebuilds cycles by following successor arcs out of the depot. Cycles
/// are listed in order of the depot's successor ids.
pub fn plan_from_edges(instance: &Instance, x: &ArcValues) -> Result<RoutePlan, DecodeError> {
    let nodes = instance.n_tasks() + 1;
    let mut succ = vec![Vec::new(); nodes];
    let mut indeg = vec![0usize; nodes];
    for i in 0..nodes {
        for j in 0..nodes {
            if i == j {
                continue;
            }
            let value = x.get(i, j);
            if (value - value.round()).abs() > INTEGRALITY_TOL {
                return Err(DecodeError::NonIntegral { from: i, to: j, value });
            }
            if value > 0.5 {
                succ[i].push(j);
                indeg[j] += 1;
            }
        }
    }
    for t in instance.task_ids() {
        if succ[t].len() != 1 || indeg[t] != 1 {
            return Err(DecodeError::BadDegree { node: t, outgoing: succ[t].len(), incoming: indeg[t] });
        }
    }
    if succ[DEPOT].len() > instance.n_vehicles() {
        return Err(DecodeError::TooManyCycles {
            cycles: succ[DEPOT].len(),
            vehicles: instance.n_vehicles(),
        });
    }

    let mut visited = vec![false; nodes];
    let mut cycles = Vec::new();
    for &first in &succ[DEPOT] {
        let mut cycle = Vec::new();
        let mut node = first;
        // degrees are all one, so every walk from the depot returns to it
        while node != DEPOT {
            visited[node] = true;
            cycle.push(node);
            node = succ[node][0];
        }
        cycles.push(cycle);
    }
    if let Some(start) = instance.task_ids().find(|&t| !visited[t]) {
        let mut tasks = vec![start];
        let mut node = succ[start][0];
        while node != start {
            tasks.push(node);
            node = succ[node][0];
        }
        return Err(DecodeError::SubtourDetected { tasks });
    }
    Ok(RoutePlan::new(cycles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Point, Task};
    use std::collections::BTreeMap;

    fn instance(n: usize, n_v: usize) -> Instance {
        let tasks = (1..=n).map(|id| Task { id, x: id as f64, y: 1.0, service: 0.0 }).collect();
        Instance::new(tasks, Point::new(0.0, 0.0), 1.0, n_v, BTreeMap::new()).unwrap()
    }

    #[test]
    fn single_cycle() {
        let x = ArcValues::from_arcs(2, [(0, 1), (1, 0)]);
        assert_eq!(plan_from_edges(&instance(1, 1), &x).unwrap().cycles(), &[vec![1]]);
    }

    #[test]
    fn two_cycles() {
        let x = ArcValues::from_arcs(4, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 0)]);
        let plan = plan_from_edges(&instance(3, 2), &x).unwrap();
        assert_eq!(plan.cycles(), &[vec![1, 2], vec![3]]);
    }

    #[test]
    fn subtour() {
        let x = ArcValues::from_arcs(5, [(1, 2), (2, 3), (3, 1), (0, 4), (4, 0)]);
        assert_eq!(
            plan_from_edges(&instance(4, 2), &x).unwrap_err(),
            DecodeError::SubtourDetected { tasks: vec![1, 2, 3] }
        );
    }

    #[test]
    fn non_integral() {
        let mut x = ArcValues::from_arcs(2, [(0, 1), (1, 0)]);
        x.set(0, 1, 0.5);
        assert!(matches!(
            plan_from_edges(&instance(1, 1), &x),
            Err(DecodeError::NonIntegral { from: 0, to: 1, .. })
        ));
    }

    #[test]
    fn too_many_cycles() {
        let x = ArcValues::from_arcs(3, [(0, 1), (1, 0), (0, 2), (2, 0)]);
        assert!(matches!(
            plan_from_edges(&instance(2, 1), &x),
            Err(DecodeError::TooManyCycles { cycles: 2, vehicles: 1 })
        ));
    }

    #[test]
    fn bad_degree() {
        let x = ArcValues::from_arcs(3, [(0, 1), (1, 0), (1, 2), (2, 0)]);
        assert!(matches!(
            plan_from_edges(&instance(2, 2), &x),
            Err(DecodeError::BadDegree { node: 1, .. })
        ));
    }
}
