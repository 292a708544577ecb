//! Solver-agnostic linear models of the routing problem.
//!
//! Three formulations are built over the complete digraph on
//! `V = {depot} ∪ T`:
//!
//! * [`build_f1`]: node-based, MTZ-style big-M sequencing on arrival times
//!   `u_i` and return times `v_i`.
//! * [`build_f2`]: arc-based flow formulation, with `y_ij`/`w_ij` carrying
//!   the arrival/return times along selected arcs.
//! * [`build_f3`]: [`build_f2`] with tightened arc bounds and the objective
//!   linked only through each cycle's first task.
//!
//! Constraint names follow `<tag>_<i>[_<j>]` where the tag identifies the
//! constraint family (`e4` sequencing on `u`, `e8`/`e18` revisit, ...).

mod check;
mod decode;
mod formulation;
mod lp_format;
mod mps;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::instance::Instance;

pub use check::{check_plan_against_model, CheckError, ModelCheck};
pub use decode::{plan_from_edges, ArcValues, DecodeError};
pub use formulation::{build_f1, build_f2, build_f3, build_formulation};
pub use lp_format::{parse_lp, write_lp};
pub use mps::{parse_mps, write_mps};

/// Tolerance used when checking candidate assignments against model rows.
pub const ROW_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    SyntaxError { line: usize, column: usize, message: String },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("name {0:?} is too long for the format and its shortened form collides")]
    NameTooLong(String),
    #[error("constraint {0:?} has no terms and cannot be written")]
    EmptyRow(String),
    #[error("model was built for instance {model} but instance hash is {instance}")]
    HashMismatch { model: String, instance: String },
    #[error("invalid model: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formulation {
    F1,
    F2,
    F3,
}

impl Formulation {
    pub fn tag(self) -> &'static str {
        match self {
            Formulation::F1 => "f1",
            Formulation::F2 => "f2",
            Formulation::F3 => "f3",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag.to_ascii_lowercase().as_str() {
            "f1" => Some(Formulation::F1),
            "f2" => Some(Formulation::F2),
            "f3" => Some(Formulation::F3),
            _ => None,
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelFormat {
    Lp,
    Mps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Ge => lhs >= rhs - tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// `(variable index, coefficient)`, no zero coefficients, no repeats.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }
}

/// Metadata that does not affect the model's mathematics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelMeta {
    pub formulation: Option<Formulation>,
    pub instance_hash: Option<String>,
}

/// Maps routing quantities to variable indices, recovered from the
/// variable naming scheme (`x_i_j`, `u_i`, `v_i`, `y_i_j`, `w_i_j`, `z`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarIndex {
    nodes: usize,
    x: Vec<Option<usize>>,
    y: Vec<Option<usize>>,
    w: Vec<Option<usize>>,
    u: Vec<Option<usize>>,
    v: Vec<Option<usize>>,
    z: Option<usize>,
}

impl VarIndex {
    fn from_variables(vars: &[Variable]) -> Self {
        let mut parsed = Vec::new();
        let mut nodes = 0;
        for (k, var) in vars.iter().enumerate() {
            let mut parts = var.name.split('_');
            let head = parts.next().unwrap_or("");
            let ids: Option<Vec<usize>> = parts.map(|p| p.parse().ok()).collect();
            let Some(ids) = ids else { continue };
            match (head, ids.as_slice()) {
                ("x" | "y" | "w", &[i, j]) if i != j => {
                    nodes = nodes.max(i + 1).max(j + 1);
                    parsed.push((k, head, i, j));
                }
                ("u" | "v", &[i]) => {
                    nodes = nodes.max(i + 1);
                    parsed.push((k, head, i, 0));
                }
                ("z", &[]) => parsed.push((k, head, 0, 0)),
                _ => {}
            }
        }
        let mut index = VarIndex {
            nodes,
            x: vec![None; nodes * nodes],
            y: vec![None; nodes * nodes],
            w: vec![None; nodes * nodes],
            u: vec![None; nodes],
            v: vec![None; nodes],
            z: None,
        };
        for (k, head, i, j) in parsed {
            match head {
                "x" => index.x[i * nodes + j] = Some(k),
                "y" => index.y[i * nodes + j] = Some(k),
                "w" => index.w[i * nodes + j] = Some(k),
                "u" => index.u[i] = Some(k),
                "v" => index.v[i] = Some(k),
                _ => index.z = Some(k),
            }
        }
        index
    }

    /// Number of graph nodes the index spans (depot included).
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    fn arc(table: &[Option<usize>], nodes: usize, i: usize, j: usize) -> Option<usize> {
        if i < nodes && j < nodes {
            table[i * nodes + j]
        } else {
            None
        }
    }

    pub fn x(&self, i: usize, j: usize) -> Option<usize> {
        Self::arc(&self.x, self.nodes, i, j)
    }

    pub fn y(&self, i: usize, j: usize) -> Option<usize> {
        Self::arc(&self.y, self.nodes, i, j)
    }

    pub fn w(&self, i: usize, j: usize) -> Option<usize> {
        Self::arc(&self.w, self.nodes, i, j)
    }

    pub fn u(&self, i: usize) -> Option<usize> {
        self.u.get(i).copied().flatten()
    }

    pub fn v(&self, i: usize) -> Option<usize> {
        self.v.get(i).copied().flatten()
    }

    pub fn z(&self) -> Option<usize> {
        self.z
    }

    /// True when every arc between the `nodes` graph nodes has an `x` variable.
    pub fn has_all_arcs(&self, nodes: usize) -> bool {
        nodes <= self.nodes
            && (0..nodes).all(|i| (0..nodes).all(|j| i == j || self.x(i, j).is_some()))
    }
}

/// A minimization MILP with bounded variables and linear rows.
#[derive(Clone, Debug)]
pub struct MilpModel {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, f64)>,
    pub meta: ModelMeta,
    index: VarIndex,
    names: HashMap<String, usize>,
}

/// Equality ignores metadata.
impl PartialEq for MilpModel {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables
            && self.constraints == other.constraints
            && self.objective == other.objective
    }
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            meta: ModelMeta::default(),
            index: VarIndex::default(),
            names: HashMap::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> usize {
        let name = name.into();
        let k = self.variables.len();
        let previous = self.names.insert(name.clone(), k);
        assert!(previous.is_none(), "duplicate variable name {name}");
        self.variables.push(Variable { name, lower, upper, kind });
        self.index = VarIndex::default();
        k
    }

    /// Adds a row, merging repeated variables and dropping zero coefficients.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        let terms = normalize_terms(terms);
        self.constraints.push(Constraint { name: name.into(), terms, relation, rhs });
    }

    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = (usize, f64)>) {
        self.objective = normalize_terms(terms);
    }

    /// Rebuilds the role index from variable names. Called by builders and
    /// parsers once all variables exist.
    pub fn finish(mut self) -> Self {
        self.index = VarIndex::from_variables(&self.variables);
        self
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(usize, f64)] {
        &self.objective
    }

    pub fn index(&self) -> &VarIndex {
        &self.index
    }

    pub fn var_by_name(&self, name: &str) -> Option<usize> {
        self.names.get(name).copied()
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn n_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// Checks structural invariants: binaries bounded by `[0, 1]`, rows
    /// referencing declared variables only, unique row names.
    pub fn validate(&self) -> Result<(), ModelError> {
        for var in &self.variables {
            if var.kind == VarKind::Binary && (var.lower < 0.0 || var.upper > 1.0) {
                return Err(ModelError::Invalid(format!(
                    "binary {} has bounds [{}, {}]",
                    var.name, var.lower, var.upper
                )));
            }
            if var.lower.is_nan() || var.upper.is_nan() {
                return Err(ModelError::Invalid(format!("variable {} has NaN bounds", var.name)));
            }
        }
        let n = self.variables.len();
        let mut seen = HashMap::new();
        for (k, row) in self.constraints.iter().enumerate() {
            if let Some(&(j, _)) = row.terms.iter().find(|&&(j, _)| j >= n) {
                return Err(ModelError::Invalid(format!("row {} references variable {j}", row.name)));
            }
            if seen.insert(row.name.as_str(), k).is_some() {
                return Err(ModelError::Invalid(format!("duplicate row name {}", row.name)));
            }
        }
        if let Some(&(j, _)) = self.objective.iter().find(|&&(j, _)| j >= n) {
            return Err(ModelError::Invalid(format!("objective references variable {j}")));
        }
        Ok(())
    }

    /// Copy with every binary relaxed to a continuous `[0, 1]` variable.
    pub fn relaxed(&self) -> MilpModel {
        let mut out = self.clone();
        for var in &mut out.variables {
            var.kind = VarKind::Continuous;
        }
        out
    }

    pub fn write(&self, format: ModelFormat) -> Result<String, ModelError> {
        match format {
            ModelFormat::Lp => write_lp(self),
            ModelFormat::Mps => write_mps(self),
        }
    }

    pub fn parse(text: &str, format: ModelFormat) -> Result<MilpModel, ModelError> {
        match format {
            ModelFormat::Lp => parse_lp(text),
            ModelFormat::Mps => parse_mps(text),
        }
    }
}

fn normalize_terms(terms: impl IntoIterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    for (j, a) in terms {
        *merged.entry(j).or_insert(0.0) += a;
    }
    merged.into_iter().filter(|&(_, a)| a != 0.0).collect()
}

/// Finite stand-in for infinite bounds and the big-M constant.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Horizon(pub f64);

impl Horizon {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Sum over nodes of the largest outgoing elapsed time. Every simple cycle
/// uses at most one outgoing arc per node, so no cycle is longer.
pub fn compute_horizon(instance: &Instance) -> Horizon {
    let travel = instance.travel();
    let size = travel.size();
    let total = (0..size)
        .map(|i| {
            (0..size)
                .filter(|&j| j != i)
                .map(|j| travel.get(i, j))
                .fold(0.0, f64::max)
        })
        .sum();
    Horizon(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Point, Task};
    use std::collections::BTreeMap;

    fn collinear() -> Instance {
        let tasks = vec![
            Task { id: 1, x: 1.0, y: 0.0, service: 0.0 },
            Task { id: 2, x: 2.0, y: 0.0, service: 0.0 },
        ];
        Instance::new(tasks, Point::new(0.0, 0.0), 1.0, 1, BTreeMap::new()).unwrap()
    }

    #[test]
    fn horizon_single_task() {
        let tasks = vec![Task { id: 1, x: 3.0, y: 4.0, service: 0.0 }];
        let inst = Instance::new(tasks, Point::new(0.0, 0.0), 1.0, 1, BTreeMap::new()).unwrap();
        assert_eq!(compute_horizon(&inst).value(), 10.0);
    }

    #[test]
    fn horizon_collinear() {
        // row maxima 2, 1, 2
        assert_eq!(compute_horizon(&collinear()).value(), 5.0);
    }

    #[test]
    fn terms_are_merged() {
        let mut m = MilpModel::new("t");
        let a = m.add_var("a", 0.0, 1.0, VarKind::Continuous);
        let b = m.add_var("b", 0.0, 1.0, VarKind::Continuous);
        m.add_constraint("r", [(b, 2.0), (a, 1.0), (a, -1.0)], Relation::Le, 1.0);
        assert_eq!(m.constraints()[0].terms, vec![(b, 2.0)]);
    }

    #[test]
    fn validate_catches_bad_binary() {
        let mut m = MilpModel::new("t");
        m.add_var("x_0_1", 0.0, 2.0, VarKind::Binary);
        assert!(matches!(m.validate(), Err(ModelError::Invalid(_))));
    }

    #[test]
    fn index_from_names() {
        let mut m = MilpModel::new("t");
        m.add_var("x_0_1", 0.0, 1.0, VarKind::Binary);
        m.add_var("x_1_0", 0.0, 1.0, VarKind::Binary);
        m.add_var("u_1", 0.0, 5.0, VarKind::Continuous);
        m.add_var("z", 0.0, 5.0, VarKind::Continuous);
        m.add_var("other_7", 0.0, 5.0, VarKind::Continuous);
        let m = m.finish();
        let idx = m.index();
        assert_eq!(idx.x(0, 1), Some(0));
        assert_eq!(idx.x(1, 0), Some(1));
        assert_eq!(idx.u(1), Some(2));
        assert_eq!(idx.z(), Some(3));
        assert_eq!(idx.v(1), None);
        assert!(idx.has_all_arcs(2));
    }
}
