use std::collections::BTreeMap;

use pisr_core::heuristic::tree_search;
use pisr_core::milp::{build_formulation, Formulation, ModelFormat};
use pisr_core::oracle::{brute_force_solve, brute_force_with, OracleConfig};
use pisr_core::{evaluate_plan, generate_instance, ConstraintPolicy, GeneratorConfig, Instance, Point, RoutePlan, Task};
use proptest::prelude::*;

fn instance_strategy(max_tasks: usize) -> impl Strategy<Value = Instance> {
    (1..=max_tasks, 1usize..=3, any::<u64>(), any::<bool>(), 0usize..=2).prop_map(|(n, n_v, seed, farthest, k)| {
        let nearest_k = k.min(n - usize::from(farthest));
        let policy = ConstraintPolicy { farthest, nearest_k, factor: 1.1 };
        generate_instance(seed, &GeneratorConfig::new(n, n_v).with_policy(policy)).unwrap()
    })
}

/// Random partition of the tasks into at most `n_v` ordered cycles.
fn plan_for(instance: &Instance, keys: &[(u32, u8)]) -> RoutePlan {
    let n_v = instance.n_vehicles();
    let mut order: Vec<usize> = instance.task_ids().collect();
    order.sort_by_key(|&t| keys[t - 1].0);
    let mut cycles = vec![Vec::new(); n_v];
    for t in order {
        cycles[keys[t - 1].1 as usize % n_v].push(t);
    }
    RoutePlan::new(cycles)
}

fn instance_and_plan(max_tasks: usize) -> impl Strategy<Value = (Instance, RoutePlan)> {
    instance_strategy(max_tasks).prop_flat_map(|inst| {
        let n = inst.n_tasks();
        (Just(inst), prop::collection::vec((any::<u32>(), any::<u8>()), n))
            .prop_map(|(inst, keys)| {
                let plan = plan_for(&inst, &keys);
                (inst, plan)
            })
    })
}

fn scaled(instance: &Instance, lambda: f64) -> Instance {
    let tasks = instance
        .tasks()
        .iter()
        .map(|t| Task { id: t.id, x: t.x * lambda, y: t.y * lambda, service: 0.0 })
        .collect();
    let depot = Point::new(instance.depot().x * lambda, instance.depot().y * lambda);
    let limits: BTreeMap<usize, f64> = instance.revisit_limits().iter().map(|(&k, &r)| (k, r * lambda)).collect();
    Instance::new(tasks, depot, instance.speed(), instance.n_vehicles(), limits).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn arrival_plus_return_is_cycle_length((inst, plan) in instance_and_plan(9)) {
        let m = evaluate_plan(&inst, &plan).unwrap();
        for t in inst.task_ids() {
            let length = m.cycle_lengths[m.cycle_of(t)];
            prop_assert!((m.u(t) + m.v(t) - length).abs() <= 1e-9, "task {t}");
        }
        let z = inst.task_ids().map(|t| m.delivery(t)).fold(0.0, f64::max);
        prop_assert_eq!(z, m.z);
    }

    #[test]
    fn power_of_two_scaling_is_exact((inst, plan) in instance_and_plan(9), e in -3i32..=4) {
        let lambda = 2f64.powi(e);
        let a = evaluate_plan(&inst, &plan).unwrap();
        let b = evaluate_plan(&scaled(&inst, lambda), &plan).unwrap();
        prop_assert_eq!(b.z, a.z * lambda);
        prop_assert_eq!(a.feasible, b.feasible);
        for (la, lb) in a.cycle_lengths.iter().zip(&b.cycle_lengths) {
            prop_assert_eq!(*lb, la * lambda);
        }
        for t in inst.task_ids() {
            prop_assert_eq!(b.u(t), a.u(t) * lambda);
            prop_assert_eq!(b.v(t), a.v(t) * lambda);
        }
    }

    #[test]
    fn arbitrary_scaling_is_covariant((inst, plan) in instance_and_plan(9), lambda in 0.01f64..100.0) {
        let a = evaluate_plan(&inst, &plan).unwrap();
        let b = evaluate_plan(&scaled(&inst, lambda), &plan).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs().max(1.0);
        prop_assert!(close(b.z, a.z * lambda));
        for t in inst.task_ids() {
            prop_assert!(close(b.u(t), a.u(t) * lambda));
            prop_assert!(close(b.v(t), a.v(t) * lambda));
        }
        // verdicts only flip when a cycle sits on its limit
        let margin = a.violations.iter().map(|v| (v.cycle_length - v.limit).abs()).fold(f64::INFINITY, f64::min);
        if margin > 1e-3 {
            prop_assert_eq!(a.violations.len(), b.violations.len());
        }
    }

    #[test]
    fn cycle_order_does_not_change_metrics((inst, plan) in instance_and_plan(9)) {
        let mut cycles = plan.cycles().to_vec();
        cycles.reverse();
        let a = evaluate_plan(&inst, &plan).unwrap();
        let b = evaluate_plan(&inst, &RoutePlan::new(cycles)).unwrap();
        prop_assert_eq!(a.z, b.z);
        prop_assert_eq!(a.feasible, b.feasible);
        for t in inst.task_ids() {
            prop_assert_eq!((a.u(t), a.v(t)), (b.u(t), b.v(t)));
        }
    }

    #[test]
    fn generator_is_byte_deterministic(seed in any::<u64>(), n in 1usize..20, n_v in 1usize..5) {
        let config = GeneratorConfig::new(n, n_v);
        let a = generate_instance(seed, &config).unwrap();
        let b = generate_instance(seed, &config).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        prop_assert_eq!(a.hash(), b.hash());
        let back = Instance::from_json(&a.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), a.to_json());
    }

    #[test]
    fn plan_file_round_trips((inst, plan) in instance_and_plan(9)) {
        let text = plan.to_json(&inst.hash());
        let back = RoutePlan::from_json_for(&text, &inst).unwrap();
        prop_assert_eq!(&back, &plan);
        prop_assert_eq!(back.to_json(&inst.hash()), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn model_text_is_a_fixpoint(inst in instance_strategy(6)) {
        for formulation in [Formulation::F1, Formulation::F2, Formulation::F3] {
            let model = build_formulation(&inst, formulation);
            for format in [ModelFormat::Lp, ModelFormat::Mps] {
                let first = model.write(format).unwrap();
                let parsed = pisr_core::milp::MilpModel::parse(&first, format).unwrap();
                let second = parsed.write(format).unwrap();
                prop_assert!(first == second, "{formulation} {format:?}");
            }
        }
    }

    #[test]
    fn oracle_pruning_keeps_the_optimum(inst in instance_strategy(6)) {
        let pruned = brute_force_solve(&inst).unwrap();
        let full = brute_force_with(&inst, &OracleConfig { prune: false, ..OracleConfig::default() }).unwrap();
        prop_assert_eq!(pruned.status, full.status);
        prop_assert_eq!(&pruned.plan, &full.plan);
        prop_assert_eq!(pruned.objective, full.objective);
        prop_assert!(pruned.nodes <= full.nodes);
        if let Some(plan) = &full.plan {
            prop_assert!(evaluate_plan(&inst, plan).unwrap().feasible);
        }
    }

    #[test]
    fn heuristic_is_deterministic(inst in instance_strategy(8), budget in 1u64..5000) {
        let a = tree_search(&inst, budget);
        let b = tree_search(&inst, budget);
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(&a.bfs_plan, &b.bfs_plan);
        prop_assert_eq!(&a.final_plan, &b.final_plan);
        prop_assert_eq!(a.final_cost, b.final_cost);
        prop_assert_eq!(a.nodes_explored, b.nodes_explored);
    }

    #[test]
    fn larger_budgets_never_hurt(inst in instance_strategy(8), small in 1u64..2000, extra in 0u64..5000) {
        let a = tree_search(&inst, small);
        let b = tree_search(&inst, small + extra);
        prop_assert!(a.nodes_explored <= small);
        prop_assert!(a.nodes_explored <= b.nodes_explored);
        if a.bfs_plan.is_some() {
            prop_assert_eq!(&a.bfs_plan, &b.bfs_plan);
        }
        match (a.final_cost, b.final_cost) {
            (Some(x), Some(y)) => prop_assert!(y <= x),
            (Some(_), None) => prop_assert!(false, "plan lost with a larger budget"),
            _ => {}
        }
    }

    #[test]
    fn heuristic_never_beats_the_oracle(inst in instance_strategy(7)) {
        let exact = brute_force_solve(&inst).unwrap();
        let heur = tree_search(&inst, 1_000_000);
        match (exact.objective, heur.final_cost) {
            (Some(opt), Some(h)) => prop_assert!(h >= opt - 1e-6),
            (None, Some(_)) => prop_assert!(false, "heuristic plan on an infeasible instance"),
            _ => {}
        }
        if let Some(plan) = &heur.final_plan {
            prop_assert!(evaluate_plan(&inst, plan).unwrap().feasible);
        }
    }
}
