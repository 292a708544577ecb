use crate::instance::{Instance, DEPOT};
use crate::plan::{evaluate_plan, PlanError, RoutePlan};

use super::{MilpModel, ModelError, ROW_TOL};

/// Result of plugging a plan's canonical variable assignment into a model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheck {
    pub feasible: bool,
    pub objective: f64,
    /// One value per model variable.
    pub values: Vec<f64>,
    /// Names of violated rows; violated variable bounds appear as
    /// `bound:<variable>`.
    pub violations: Vec<String>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CheckError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Builds the assignment a plan induces and evaluates every row and bound.
///
/// `x` marks the plan's arcs; `u`/`v` come from plan evaluation; arc
/// variables carry the arrival time at the head (`y`) and the return time
/// from the tail (`w`), with depot legs carrying the full cycle length;
/// `z` is the largest delivery time.
pub fn check_plan_against_model(
    model: &MilpModel,
    instance: &Instance,
    plan: &RoutePlan,
) -> Result<ModelCheck, CheckError> {
    if let Some(hash) = &model.meta.instance_hash {
        let expected = instance.hash();
        if *hash != expected {
            return Err(ModelError::HashMismatch { model: hash.clone(), instance: expected }.into());
        }
    }
    let metrics = evaluate_plan(instance, plan)?;
    let index = model.index();
    let mut values = vec![0.0; model.variables().len()];
    let mut set = |slot: Option<usize>, value: f64| {
        if let Some(k) = slot {
            values[k] = value;
        }
    };

    for (k, cycle) in plan.cycles().iter().enumerate() {
        let length = metrics.cycle_lengths[k];
        let mut prev = DEPOT;
        for &task in cycle.iter().chain(std::iter::once(&DEPOT)) {
            set(index.x(prev, task), 1.0);
            let arrival = if task == DEPOT { length } else { metrics.u(task) };
            let back = if prev == DEPOT { length } else { metrics.v(prev) };
            set(index.y(prev, task), arrival);
            set(index.w(prev, task), back);
            prev = task;
        }
    }
    for t in instance.task_ids() {
        set(index.u(t), metrics.u(t));
        set(index.v(t), metrics.v(t));
    }
    set(index.z(), metrics.z);

    let mut violations = Vec::new();
    for (k, var) in model.variables().iter().enumerate() {
        if values[k] < var.lower - ROW_TOL || values[k] > var.upper + ROW_TOL {
            violations.push(format!("bound:{}", var.name));
        }
    }
    for row in model.constraints() {
        if !row.relation.holds(row.activity(&values), row.rhs, ROW_TOL) {
            violations.push(row.name.clone());
        }
    }
    Ok(ModelCheck {
        feasible: violations.is_empty(),
        objective: model.objective_value(&values),
        values,
        violations,
    })
}
