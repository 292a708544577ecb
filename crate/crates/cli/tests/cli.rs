use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pisr_core::milp::{MilpModel, ModelFormat};
use pisr_core::{Instance, RoutePlan};
use tempfile::TempDir;

fn pisr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pisr")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let file = path(dir, name);
    let mut args = vec!["gen", "--out", s(&file)];
    args.extend_from_slice(extra);
    let out = pisr(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    file
}

fn write_plan(dir: &TempDir, name: &str, instance: &Path, cycles: Vec<Vec<usize>>) -> PathBuf {
    let inst = Instance::from_json(&fs::read_to_string(instance).unwrap()).unwrap();
    let file = path(dir, name);
    fs::write(&file, RoutePlan::new(cycles).to_json(&inst.hash())).unwrap();
    file
}

#[test]
fn gen_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = gen(&dir, "a.json", &["--seed", "42", "--tasks", "9"]);
    let b = gen(&dir, "b.json", &["--seed", "42", "--tasks", "9"]);
    let c = gen(&dir, "c.json", &["--seed", "43", "--tasks", "9"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn gen_applies_the_constraint_policy() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "i.json", &["--seed", "1", "--tasks", "10", "--factor", "1.3"]);
    let text = fs::read_to_string(&file).unwrap();
    let inst = Instance::from_json(&text).unwrap();
    assert_eq!(inst.n_tasks(), 10);
    assert_eq!(inst.n_vehicles(), 4);
    assert_eq!(inst.revisit_limits().len(), 3);
    assert!(text.contains("\"factor\": 1.300000"));

    let none = gen(&dir, "j.json", &["--tasks", "6", "--farthest", "false", "--nearest-k", "0"]);
    let inst = Instance::from_json(&fs::read_to_string(&none).unwrap()).unwrap();
    assert!(inst.revisit_limits().is_empty());
}

#[test]
fn single_task_costs_agree_across_methods() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "one.json", &["--seed", "8", "--tasks", "1", "--vehicles", "1"]);
    let mut costs = Vec::new();
    for method in ["oracle", "heuristic", "bnb-f1", "bnb-f3"] {
        let out = pisr(&["solve", "--method", method, "--in", s(&file)]);
        assert_eq!(out.status.code(), Some(0), "{method}");
        let line = stdout(&out);
        let cost: f64 = line.split("cost=").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
        costs.push(cost);
    }
    assert!(costs.iter().all(|c| (c - costs[0]).abs() <= 1e-6), "{costs:?}");
}

#[test]
fn solve_writes_a_plan_that_evaluates_feasible() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "i.json", &["--seed", "5", "--tasks", "5"]);
    let plan = path(&dir, "p.json");
    let out = pisr(&["solve", "--method", "bnb-f3", "--in", s(&file), "--out", s(&plan)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("status=optimal"));
    let out = pisr(&["eval", "--in", s(&file), "--plan", s(&plan)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).ends_with("feasible true\n"));
}

#[test]
fn unknown_formulation_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "i.json", &["--tasks", "3"]);
    let out = pisr(&["emit", "--formulation", "f9", "--in", s(&file)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(pisr(&["solve", "--method", "simplex", "--in", s(&file)]).status.code() == Some(2));
    assert!(pisr(&["frobnicate"]).status.code() == Some(2));
}

#[test]
fn emitted_models_are_a_fixpoint() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "i.json", &["--seed", "2", "--tasks", "5"]);
    for formulation in ["f1", "f2", "f3"] {
        for (flag, format) in [("lp", ModelFormat::Lp), ("mps", ModelFormat::Mps)] {
            let out = pisr(&["emit", "--formulation", formulation, "--format", flag, "--in", s(&file)]);
            assert_eq!(out.status.code(), Some(0));
            let text = stdout(&out);
            let again = MilpModel::parse(&text, format).unwrap().write(format).unwrap();
            assert_eq!(text, again, "{formulation} {flag}");
        }
    }
}

#[test]
fn strengthened_model_has_more_rows() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "i.json", &["--seed", "2", "--tasks", "6"]);
    let rows = |f: &str| {
        let text = stdout(&pisr(&["emit", "--formulation", f, "--in", s(&file)]));
        MilpModel::parse(&text, ModelFormat::Lp).unwrap().constraints().len()
    };
    assert!(rows("f3") > rows("f2"));
    assert!(rows("f2") > rows("f1"));
}

#[test]
fn eval_names_each_violation() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "i.json", &["--seed", "5", "--tasks", "5"]);
    let plan = write_plan(&dir, "p.json", &file, vec![vec![1, 2, 3, 4, 5]]);
    let out = pisr(&["eval", "--in", s(&file), "--plan", s(&plan)]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert!(text.contains("violation: task 2 "));
    assert!(text.contains("violation: task 3 "));
    assert!(text.ends_with("feasible false\n"));
}

#[test]
fn eval_rejects_a_plan_missing_a_task() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "i.json", &["--seed", "5", "--tasks", "5"]);
    let plan = write_plan(&dir, "p.json", &file, vec![vec![1, 2], vec![3, 4]]);
    let out = pisr(&["eval", "--in", s(&file), "--plan", s(&plan)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MissingTask"));
}

#[test]
fn bench_csv_header_is_stable() {
    let out = pisr(&["bench", "--sizes", "3", "--count", "1", "--methods", "heuristic"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "instance,seed,n,n_v,f1_cost,f1_time,f1_status,f1_mark,f3_cost,f3_time,f3_status,f3_mark,\
         bfs_cost,bfs_time,final_cost,final_time,nodes,heuristic_status,\
         oracle_cost,oracle_time,oracle_status,oracle_mark,agree"
    );
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn bench_methods_agree_on_small_sizes() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "bench.csv");
    let out = pisr(&[
        "bench", "--sizes", "6,8", "--count", "5", "--methods", "oracle,bnb-f3,heuristic", "--out", s(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let mut rows = 0;
    for record in reader.records() {
        let r = record.unwrap();
        rows += 1;
        assert_eq!(&r[col("agree")], "true", "{r:?}");
        assert_eq!(&r[col("f1_status")], "skipped");
        if &r[col("oracle_status")] == "optimal" {
            assert_eq!(&r[col("f3_status")], "optimal");
            let opt: f64 = r[col("oracle_cost")].parse().unwrap();
            let heur: f64 = r[col("final_cost")].parse().unwrap();
            assert!(heur >= opt - 1e-6);
        }
    }
    assert_eq!(rows, 10);
}

fn count(text: &str, needle: &str) -> usize {
    text.matches(needle).count()
}

#[test]
fn plot_draws_one_path_per_cycle() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "one.json", &["--seed", "3", "--tasks", "1", "--vehicles", "1"]);
    let plan = write_plan(&dir, "p.json", &file, vec![vec![1]]);
    let svg = path(&dir, "p.svg");
    assert_eq!(pisr(&["plot", "--in", s(&file), "--plan", s(&plan), "--out", s(&svg)]).status.code(), Some(0));
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(count(&text, "class=\"cycle\""), 1);
    assert!(text.starts_with("<svg") && text.ends_with("</svg>\n"));
}

#[test]
fn plot_marks_every_constrained_task() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "i.json", &["--seed", "4", "--tasks", "10"]);
    let inst = Instance::from_json(&fs::read_to_string(&file).unwrap()).unwrap();
    let plan = write_plan(&dir, "p.json", &file, vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8], vec![9, 10]]);
    let a = path(&dir, "a.svg");
    let b = path(&dir, "b.svg");
    for svg in [&a, &b] {
        assert_eq!(pisr(&["plot", "--in", s(&file), "--plan", s(&plan), "--out", s(svg)]).status.code(), Some(0));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(count(&text, "class=\"constrained\""), inst.revisit_limits().len());
    assert_eq!(count(&text, ">R="), inst.revisit_limits().len());
    assert_eq!(count(&text, "class=\"task\""), 10 - inst.revisit_limits().len());
    assert_eq!(count(&text, "class=\"cycle\""), 4);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn plot_rejects_a_plan_for_another_instance() {
    let dir = TempDir::new().unwrap();
    let file = gen(&dir, "i.json", &["--seed", "4", "--tasks", "4"]);
    let other = gen(&dir, "o.json", &["--seed", "5", "--tasks", "4"]);
    let plan = write_plan(&dir, "p.json", &other, vec![vec![1, 2], vec![3, 4]]);
    let svg = path(&dir, "p.svg");
    let out = pisr(&["plot", "--in", s(&file), "--plan", s(&plan), "--out", s(&svg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!svg.exists());
}
