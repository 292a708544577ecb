use crate::instance::{Instance, DEPOT};

use super::{compute_horizon, Formulation, MilpModel, Relation, VarKind};

/// Revisit limit used inside models: unconstrained tasks get the horizon,
/// and no limit needs to exceed it since no cycle is longer.
fn model_limit(instance: &Instance, horizon: f64, task: usize) -> f64 {
    instance.revisit_limit(task).map_or(horizon, |r| r.min(horizon))
}

/// Dense `(n+1)²` table of arc variable indices; diagonal unused.
struct ArcVars {
    nodes: usize,
    idx: Vec<usize>,
}

impl ArcVars {
    fn add(model: &mut MilpModel, nodes: usize, prefix: &str, upper: f64, kind: VarKind) -> Self {
        let mut idx = vec![usize::MAX; nodes * nodes];
        for i in 0..nodes {
            for j in 0..nodes {
                if i != j {
                    idx[i * nodes + j] = model.add_var(format!("{prefix}_{i}_{j}"), 0.0, upper, kind);
                }
            }
        }
        Self { nodes, idx }
    }

    fn get(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j);
        self.idx[i * self.nodes + j]
    }
}

fn new_model(instance: &Instance, formulation: Formulation) -> MilpModel {
    let mut model = MilpModel::new(format!("pisr_{}", formulation.tag()));
    model.meta.formulation = Some(formulation);
    model.meta.instance_hash = Some(instance.hash());
    model
}

/// One in- and one out-arc per task; at most `n_v` arcs leave and enter the depot.
fn degree_rows(model: &mut MilpModel, instance: &Instance, x: &ArcVars, task_tag: &str, depot_tag: &str) {
    let nodes = instance.n_tasks() + 1;
    for i in instance.task_ids() {
        let out = (0..nodes).filter(|&j| j != i).map(|j| (x.get(i, j), 1.0));
        model.add_constraint(format!("{task_tag}out_{i}"), out, Relation::Eq, 1.0);
        let inc = (0..nodes).filter(|&j| j != i).map(|j| (x.get(j, i), 1.0));
        model.add_constraint(format!("{task_tag}in_{i}"), inc, Relation::Eq, 1.0);
    }
    let n_v = instance.n_vehicles() as f64;
    let out = instance.task_ids().map(|j| (x.get(DEPOT, j), 1.0));
    model.add_constraint(format!("{depot_tag}out"), out, Relation::Le, n_v);
    let inc = instance.task_ids().map(|j| (x.get(j, DEPOT), 1.0));
    model.add_constraint(format!("{depot_tag}in"), inc, Relation::Le, n_v);
}

/// Node-based formulation with big-M sequencing rows on `u` and `v`.
///
/// Variables: binary `x_i_j` for every ordered pair of distinct nodes,
/// `u_i ∈ [c_di, R_i - c_id]`, `v_i ∈ [c_id, R_i - c_di]` for tasks, and `z`.
/// The depot's `u`/`v` are fixed at zero and substituted out.
pub fn build_f1(instance: &Instance) -> MilpModel {
    let n = instance.n_tasks();
    let nodes = n + 1;
    let h = compute_horizon(instance).value();
    let big_m = h;
    let c = |i, j| instance.cost(i, j);
    let r = |i| model_limit(instance, h, i);

    let mut m = new_model(instance, Formulation::F1);
    let x = ArcVars::add(&mut m, nodes, "x", 1.0, VarKind::Binary);
    let mut u = vec![usize::MAX; nodes];
    let mut v = vec![usize::MAX; nodes];
    for i in instance.task_ids() {
        u[i] = m.add_var(format!("u_{i}"), c(DEPOT, i), r(i) - c(i, DEPOT), VarKind::Continuous);
    }
    for i in instance.task_ids() {
        v[i] = m.add_var(format!("v_{i}"), c(i, DEPOT), r(i) - c(DEPOT, i), VarKind::Continuous);
    }
    let z = m.add_var("z", 0.0, h, VarKind::Continuous);

    degree_rows(&mut m, instance, &x, "e1", "e2");

    // u_i - u_j + c_ij <= M (1 - x_ij)
    for i in 0..nodes {
        for j in instance.task_ids() {
            if i == j {
                continue;
            }
            let mut terms = vec![(u[j], -1.0), (x.get(i, j), big_m)];
            if i != DEPOT {
                terms.push((u[i], 1.0));
            }
            m.add_constraint(format!("e4_{i}_{j}"), terms, Relation::Le, big_m - c(i, j));
        }
    }
    // v_j - v_i + c_ij <= M (1 - x_ij)
    for i in instance.task_ids() {
        for j in 0..nodes {
            if i == j {
                continue;
            }
            let mut terms = vec![(v[i], -1.0), (x.get(i, j), big_m)];
            if j != DEPOT {
                terms.push((v[j], 1.0));
            }
            m.add_constraint(format!("e6_{i}_{j}"), terms, Relation::Le, big_m - c(i, j));
        }
    }
    for i in instance.task_ids() {
        m.add_constraint(format!("e8_{i}"), [(u[i], 1.0), (v[i], 1.0)], Relation::Le, r(i));
    }
    for i in instance.task_ids() {
        m.add_constraint(format!("e9_{i}"), [(v[i], 1.0), (z, -1.0)], Relation::Le, 0.0);
    }
    m.set_objective([(z, 1.0)]);
    m.finish()
}

struct ArcModel {
    model: MilpModel,
    x: ArcVars,
    y: ArcVars,
    w: ArcVars,
    z: usize,
    h: f64,
}

/// Shared part of the arc formulations: variables, degree rows, flow
/// balance on `y` and `w`, depot-leg equalities and the revisit rows.
fn arc_common(instance: &Instance, formulation: Formulation) -> ArcModel {
    let nodes = instance.n_tasks() + 1;
    let h = compute_horizon(instance).value();
    let c = |i, j| instance.cost(i, j);
    let r = |i| model_limit(instance, h, i);

    let mut m = new_model(instance, formulation);
    let x = ArcVars::add(&mut m, nodes, "x", 1.0, VarKind::Binary);
    let y = ArcVars::add(&mut m, nodes, "y", h, VarKind::Continuous);
    let w = ArcVars::add(&mut m, nodes, "w", h, VarKind::Continuous);
    let z = m.add_var("z", 0.0, h, VarKind::Continuous);

    degree_rows(&mut m, instance, &x, "e10", "e11");
    let others = |i: usize| (0..nodes).filter(move |&j| j != i);

    // sum_j y_ij - sum_j y_ji = sum_j c_ij x_ij
    for i in instance.task_ids() {
        let terms = others(i)
            .map(|j| (y.get(i, j), 1.0))
            .chain(others(i).map(|j| (y.get(j, i), -1.0)))
            .chain(others(i).map(|j| (x.get(i, j), -c(i, j))));
        m.add_constraint(format!("e12_{i}"), terms.collect::<Vec<_>>(), Relation::Eq, 0.0);
    }
    for i in instance.task_ids() {
        m.add_constraint(
            format!("e13_{i}"),
            [(y.get(DEPOT, i), 1.0), (x.get(DEPOT, i), -c(DEPOT, i))],
            Relation::Eq,
            0.0,
        );
    }
    // sum_j w_ji - sum_j w_ij = sum_j c_ji x_ji
    for i in instance.task_ids() {
        let terms = others(i)
            .map(|j| (w.get(j, i), 1.0))
            .chain(others(i).map(|j| (w.get(i, j), -1.0)))
            .chain(others(i).map(|j| (x.get(j, i), -c(j, i))));
        m.add_constraint(format!("e15_{i}"), terms.collect::<Vec<_>>(), Relation::Eq, 0.0);
    }
    for i in instance.task_ids() {
        m.add_constraint(
            format!("e16_{i}"),
            [(w.get(i, DEPOT), 1.0), (x.get(i, DEPOT), -c(i, DEPOT))],
            Relation::Eq,
            0.0,
        );
    }
    // arrival at i plus return from i is the cycle length
    for i in instance.task_ids() {
        let terms = others(i)
            .map(|j| (y.get(j, i), 1.0))
            .chain(others(i).map(|j| (w.get(i, j), 1.0)));
        m.add_constraint(format!("e18_{i}"), terms.collect::<Vec<_>>(), Relation::Le, r(i));
    }
    ArcModel { model: m, x, y, w, z, h }
}

/// Arc-based flow formulation.
pub fn build_f2(instance: &Instance) -> MilpModel {
    let nodes = instance.n_tasks() + 1;
    let ArcModel { model: mut m, x, y, w, z, h } = arc_common(instance, Formulation::F2);
    let r = |i| model_limit(instance, h, i);

    // y_ij <= R_j x_ij; arcs into the depot use the horizon
    for i in 0..nodes {
        for j in 0..nodes {
            if i == j {
                continue;
            }
            let cap = if j == DEPOT { h } else { r(j) };
            m.add_constraint(
                format!("e14_{i}_{j}"),
                [(y.get(i, j), 1.0), (x.get(i, j), -cap)],
                Relation::Le,
                0.0,
            );
        }
    }
    // w_ij <= H x_ij, depot-out arcs included
    for i in 0..nodes {
        for j in 0..nodes {
            if i == j {
                continue;
            }
            m.add_constraint(
                format!("e17_{i}_{j}"),
                [(w.get(i, j), 1.0), (x.get(i, j), -h)],
                Relation::Le,
                0.0,
            );
        }
    }
    for i in instance.task_ids() {
        for j in 0..nodes {
            if i == j {
                continue;
            }
            m.add_constraint(
                format!("e19_{i}_{j}"),
                [(w.get(i, j), 1.0), (z, -1.0)],
                Relation::Le,
                0.0,
            );
        }
    }
    m.set_objective([(z, 1.0)]);
    m.finish()
}

/// Arc-based formulation with strengthened arc bounds and the objective
/// linked through the first task of each cycle.
pub fn build_f3(instance: &Instance) -> MilpModel {
    let nodes = instance.n_tasks() + 1;
    let ArcModel { model: mut m, x, y, w, z, h } = arc_common(instance, Formulation::F3);
    let r = |i| model_limit(instance, h, i);
    // c_dd = 0 in the depot-adjacent coefficient terms
    let c = |i: usize, j: usize| if i == j { 0.0 } else { instance.cost(i, j) };

    // an upper-bound row whose coefficient is negative would force the
    // continuous variable below zero: emit it with a zero coefficient and
    // fix the arc off instead
    let capped = |m: &mut MilpModel, tag: &str, i: usize, j: usize, var: usize, coef: f64| {
        m.add_constraint(
            format!("{tag}_{i}_{j}"),
            [(var, 1.0), (x.get(i, j), -coef.max(0.0))],
            Relation::Le,
            0.0,
        );
        if coef < 0.0 {
            m.add_constraint(format!("{tag}fix_{i}_{j}"), [(x.get(i, j), 1.0)], Relation::Eq, 0.0);
        }
    };

    for i in 0..nodes {
        for j in instance.task_ids() {
            if i != j {
                capped(&mut m, "e22", i, j, y.get(i, j), r(j) - c(j, DEPOT));
            }
        }
    }
    for i in instance.task_ids() {
        m.add_constraint(
            format!("e23_{i}"),
            [(y.get(i, DEPOT), 1.0), (x.get(i, DEPOT), -r(i))],
            Relation::Le,
            0.0,
        );
    }
    for i in 0..nodes {
        for j in 0..nodes {
            if i != j {
                m.add_constraint(
                    format!("e24_{i}_{j}"),
                    [(y.get(i, j), 1.0), (x.get(i, j), -(c(DEPOT, i) + c(i, j)))],
                    Relation::Ge,
                    0.0,
                );
            }
        }
    }
    for i in instance.task_ids() {
        for j in 0..nodes {
            if i != j {
                capped(&mut m, "e25", i, j, w.get(i, j), r(i) - c(DEPOT, i));
            }
        }
    }
    for i in instance.task_ids() {
        m.add_constraint(
            format!("e26_{i}"),
            [(w.get(DEPOT, i), 1.0), (x.get(DEPOT, i), -r(i))],
            Relation::Le,
            0.0,
        );
    }
    for i in 0..nodes {
        for j in 0..nodes {
            if i != j {
                m.add_constraint(
                    format!("e27_{i}_{j}"),
                    [(w.get(i, j), 1.0), (x.get(i, j), -(c(i, j) + c(j, DEPOT)))],
                    Relation::Ge,
                    0.0,
                );
            }
        }
    }
    // w_di - c_di <= z
    for i in instance.task_ids() {
        m.add_constraint(
            format!("e28_{i}"),
            [(w.get(DEPOT, i), 1.0), (z, -1.0)],
            Relation::Le,
            c(DEPOT, i),
        );
    }
    m.set_objective([(z, 1.0)]);
    m.finish()
}

pub fn build_formulation(instance: &Instance, formulation: Formulation) -> MilpModel {
    match formulation {
        Formulation::F1 => build_f1(instance),
        Formulation::F2 => build_f2(instance),
        Formulation::F3 => build_f3(instance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Point, Task};
    use std::collections::BTreeMap;

    fn one_task() -> Instance {
        let tasks = vec![Task { id: 1, x: 3.0, y: 4.0, service: 0.0 }];
        Instance::new(tasks, Point::new(0.0, 0.0), 1.0, 1, BTreeMap::new()).unwrap()
    }

    fn instance(n: usize) -> Instance {
        let tasks = (1..=n)
            .map(|id| Task { id, x: (id * 37 % 11) as f64, y: (id * 13 % 7) as f64, service: 0.0 })
            .collect();
        Instance::new(tasks, Point::new(5.0, 3.0), 1.0, 2, BTreeMap::from([(1, 40.0)])).unwrap()
    }

    #[test]
    fn f1_counts() {
        for n in 1..6 {
            let m = build_f1(&instance(n));
            assert_eq!(m.n_binaries(), (n + 1) * n);
            assert_eq!(m.variables().len() - m.n_binaries(), 2 * n + 1);
            m.validate().unwrap();
        }
    }

    #[test]
    fn f1_single_task_shape() {
        let m = build_f1(&one_task());
        let names: Vec<&str> = m.variables().iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["x_0_1", "x_1_0", "u_1", "v_1", "z"]);
        let u = &m.variables()[2];
        assert_eq!((u.lower, u.upper), (5.0, 5.0)); // R = H = 10
    }

    #[test]
    fn arc_models_are_valid() {
        for n in 1..5 {
            let inst = instance(n);
            for m in [build_f2(&inst), build_f3(&inst)] {
                m.validate().unwrap();
                assert!(m.index().has_all_arcs(n + 1));
                assert!(m.index().z().is_some());
            }
        }
    }

    #[test]
    fn f3_fixes_unreachable_arcs() {
        // limit below the task's own return leg forces its in-arcs off
        let tasks = vec![
            Task { id: 1, x: 3.0, y: 4.0, service: 0.0 },
            Task { id: 2, x: 0.0, y: 1.0, service: 0.0 },
        ];
        let inst =
            Instance::new(tasks, Point::new(0.0, 0.0), 1.0, 2, BTreeMap::from([(1, 4.0)])).unwrap();
        let m = build_f3(&inst);
        assert!(m.constraint("e22fix_0_1").is_some());
        assert!(m.constraint("e22fix_2_1").is_some());
        assert!(m.constraint("e22fix_0_2").is_none());
    }

    #[test]
    fn constraint_names_unique() {
        let inst = instance(4);
        for m in [build_f1(&inst), build_f2(&inst), build_f3(&inst)] {
            m.validate().unwrap();
        }
    }
}
