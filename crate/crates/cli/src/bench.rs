//! Instance suite runner producing the results table.
//!
//! Instances are numbered from 1 across all sizes in order, and instance
//! `k` is generated from seed `seed0 + k - 1`. Every (instance, method)
//! cell runs independently, so one failing cell only marks its own row.

use std::fmt::Write as _;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};

use pisr_core::{generate_instance, ConstraintPolicy, GeneratorConfig, Instance};

use crate::solvers::{failed_report, run_method, Limits, Method, Outcome, SolveReport};

pub const DEFAULT_SIZES: [usize; 3] = [6, 8, 10];
/// Costs of solvers that claim optimality must agree within this.
pub const AGREEMENT_TOL: f64 = 1e-6;

pub const HEADER: [&str; 23] = [
    "instance",
    "seed",
    "n",
    "n_v",
    "f1_cost",
    "f1_time",
    "f1_status",
    "f1_mark",
    "f3_cost",
    "f3_time",
    "f3_status",
    "f3_mark",
    "bfs_cost",
    "bfs_time",
    "final_cost",
    "final_time",
    "nodes",
    "heuristic_status",
    "oracle_cost",
    "oracle_time",
    "oracle_status",
    "oracle_mark",
    "agree",
];

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub count: usize,
    pub seed0: u64,
    pub vehicles: usize,
    pub methods: Vec<Method>,
    pub limits: Limits,
    /// Heuristic node budget, kept apart from the bnb limits.
    pub heuristic_nodes: Option<u64>,
    /// Worker threads; `None` uses the pool default.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            count: 10,
            seed0: 1,
            vehicles: 4,
            methods: vec![Method::BnbF1, Method::BnbF3, Method::Heuristic],
            limits: Limits::default(),
            heuristic_nodes: None,
            threads: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub instance: usize,
    pub seed: u64,
    pub n: usize,
    pub n_v: usize,
    /// One report per requested method, in the order requested.
    pub cells: Vec<SolveReport>,
}

impl BenchRow {
    pub fn cell(&self, method: Method) -> Option<&SolveReport> {
        self.cells.iter().find(|c| c.method == method)
    }

    /// True when every exact solver that finished agrees on the optimum.
    pub fn optimal_costs_agree(&self) -> bool {
        let costs: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.method != Method::Heuristic && c.outcome == Outcome::Complete)
            .filter_map(|c| c.cost)
            .collect();
        costs.windows(2).all(|w| (w[0] - w[1]).abs() <= AGREEMENT_TOL * w[0].abs().max(1.0))
    }

    fn record(&self) -> Vec<String> {
        let mut rec = vec![self.instance.to_string(), self.seed.to_string(), self.n.to_string(), self.n_v.to_string()];
        let exact = |method: Method, rec: &mut Vec<String>| match self.cell(method) {
            Some(c) => {
                rec.push(fmt_cost(c.cost));
                rec.push(format!("{:.6}", c.time));
                rec.push(c.status.clone());
                rec.push(c.outcome.mark().to_string());
            }
            None => rec.extend(["".into(), "".into(), "skipped".into(), "".into()]),
        };
        exact(Method::BnbF1, &mut rec);
        exact(Method::BnbF3, &mut rec);
        match self.cell(Method::Heuristic) {
            Some(c) => {
                let h = c.heuristic.as_ref();
                rec.push(fmt_cost(h.and_then(|h| h.bfs_cost)));
                rec.push(h.map_or_else(String::new, |h| format!("{:.6}", h.bfs_time)));
                rec.push(fmt_cost(c.cost));
                rec.push(h.map_or_else(String::new, |h| format!("{:.6}", h.final_time)));
                rec.push(h.map_or_else(String::new, |h| h.nodes.to_string()));
                rec.push(c.status.clone());
            }
            None => rec.extend(["", "", "", "", "", "skipped"].map(String::from)),
        }
        match self.cell(Method::Oracle) {
            Some(c) => {
                rec.push(fmt_cost(c.cost));
                rec.push(format!("{:.6}", c.time));
                rec.push(c.status.clone());
                rec.push(c.outcome.mark().to_string());
            }
            None => rec.extend(["", "", "skipped", ""].map(String::from)),
        }
        rec.push(self.optimal_costs_agree().to_string());
        rec
    }
}

fn fmt_cost(cost: Option<f64>) -> String {
    cost.map_or_else(String::new, |c| format!("{c:.6}"))
}

struct Job {
    row: usize,
    method: Method,
}

pub fn run_bench(config: &BenchConfig) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    let mut instances: Vec<Result<Instance, String>> = Vec::new();
    for &n in &config.sizes {
        for _ in 0..config.count {
            let id = rows.len() + 1;
            let seed = config.seed0 + id as u64 - 1;
            let gen = GeneratorConfig::new(n, config.vehicles).with_policy(ConstraintPolicy::protocol(n));
            instances.push(generate_instance(seed, &gen).map_err(|e| e.to_string()));
            rows.push(BenchRow { instance: id, seed, n, n_v: config.vehicles, cells: Vec::new() });
        }
    }
    let jobs: Vec<Job> = (0..rows.len())
        .flat_map(|row| config.methods.iter().map(move |&method| Job { row, method }))
        .collect();

    let run = |job: &Job| -> SolveReport {
        let instance = match &instances[job.row] {
            Ok(instance) => instance,
            Err(e) => return failed_report(job.method, e.clone()),
        };
        let mut limits = config.limits;
        if job.method == Method::Heuristic {
            limits.nodes = config.heuristic_nodes;
        }
        let report = catch_unwind(AssertUnwindSafe(|| run_method(instance, job.method, &limits)))
            .unwrap_or_else(|_| failed_report(job.method, "solver panicked".into()));
        log::info!("instance={} {}", rows[job.row].instance, report.summary());
        report
    };
    let reports = execute(&jobs, config.threads, run);
    for (job, report) in jobs.iter().zip(reports) {
        rows[job.row].cells.push(report);
    }
    rows
}

#[cfg(feature = "parallel")]
fn execute<F>(jobs: &[Job], threads: Option<usize>, run: F) -> Vec<SolveReport>
where
    F: Fn(&Job) -> SolveReport + Sync + Send,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    match builder.build() {
        Ok(pool) => pool.install(|| jobs.par_iter().map(&run).collect()),
        Err(_) => jobs.iter().map(run).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn execute<F>(jobs: &[Job], _threads: Option<usize>, run: F) -> Vec<SolveReport>
where
    F: Fn(&Job) -> SolveReport,
{
    jobs.iter().map(run).collect()
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(HEADER)?;
    for row in rows {
        writer.write_record(row.record())?;
    }
    writer.flush()?;
    Ok(())
}

/// Same rows in the layout of the published results table.
pub fn render_latex(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str("\\begin{tabular}{ccrrrrrcrc}\n\\toprule\n");
    out.push_str(
        "Instance \\# & $|T|$ & \\multicolumn{2}{|c|}{$\\mathcal{F}_1$} & \\multicolumn{2}{|c|}{$\\mathcal{F}_3$} & \\multicolumn{4}{|c}{Tree Search Heuristic} \\\\\n",
    );
    out.push_str(
        " & & Cost & CPU time & Cost & CPU time & BFS Cost & BFS CPU time & Final Cost & Final CPU time \\\\\n\\midrule\n",
    );
    for row in rows {
        let mut cols = vec![row.instance.to_string(), row.n.to_string()];
        for method in [Method::BnbF1, Method::BnbF3] {
            match row.cell(method) {
                Some(c) => {
                    let mark = match c.outcome.mark() {
                        "" => String::new(),
                        m => format!("$^{{{m}}}$"),
                    };
                    if c.outcome == Outcome::NoSolution || c.outcome == Outcome::Failed {
                        cols.push(mark.clone());
                        cols.push(mark);
                    } else {
                        cols.push(format!("{}{mark}", c.cost.map_or("--".into(), |c| format!("{c:.0}"))));
                        cols.push(format!("{:.2}{mark}", c.time));
                    }
                }
                None => cols.extend(["--".into(), "--".into()]),
            }
        }
        match row.cell(Method::Heuristic).and_then(|c| c.heuristic.as_ref().map(|h| (c, h))) {
            Some((c, h)) => {
                cols.push(h.bfs_cost.map_or("--".into(), |v| format!("{v:.0}")));
                cols.push(format!("{:.3}", h.bfs_time));
                cols.push(c.cost.map_or("--".into(), |v| format!("{v:.0}")));
                cols.push(format!("{:.3}", h.final_time));
            }
            None => cols.extend(["--", "--", "--", "--"].map(String::from)),
        }
        let _ = writeln!(out, "{} \\\\", cols.join(" & "));
    }
    out.push_str("\\bottomrule\n");
    out.push_str("\\multicolumn{10}{l}{$^*$\\textit{Not converged within the time limit; best found solution reported.}} \\\\\n");
    out.push_str("\\multicolumn{10}{l}{$^{**}$\\textit{No solution found within the time limit.}}\n");
    out.push_str("\\end{tabular}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(threads: Option<usize>) -> Vec<BenchRow> {
        let config = BenchConfig {
            sizes: vec![4, 5],
            count: 2,
            methods: vec![Method::Oracle, Method::Heuristic],
            threads,
            ..BenchConfig::default()
        };
        run_bench(&config)
    }

    #[test]
    fn rows_follow_sizes_and_seeds() {
        let rows = small(None);
        let shape: Vec<(usize, u64, usize)> = rows.iter().map(|r| (r.instance, r.seed, r.n)).collect();
        assert_eq!(shape, [(1, 1, 4), (2, 2, 4), (3, 3, 5), (4, 4, 5)]);
        for row in &rows {
            let record = row.record();
            assert_eq!(record.len(), HEADER.len());
            assert_eq!(record[6], "skipped");
            assert!(row.optimal_costs_agree());
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let costs = |rows: &[BenchRow]| -> Vec<Option<f64>> {
            rows.iter().flat_map(|r| r.cells.iter().map(|c| c.cost)).collect()
        };
        assert_eq!(costs(&small(Some(1))), costs(&small(Some(3))));
    }

    #[test]
    fn latex_has_one_line_per_row() {
        let rows = small(None);
        let text = render_latex(&rows);
        let body = text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit()));
        assert_eq!(body.count(), rows.len());
        assert!(text.contains("\\toprule") && text.contains("\\bottomrule"));
    }
}
