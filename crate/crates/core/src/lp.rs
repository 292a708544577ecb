//! Dense two-phase primal simplex for bounded linear programs.
//!
//! Integrality markers are ignored: every variable is treated as
//! continuous within its bounds. Fixed variables are substituted out and
//! rows and columns are scaled by powers of two (geometric passes, then
//! max-equilibration) before the tableau is built. Upper bounds are
//! handled implicitly by the bounded-variable ratio test, so the tableau
//! has one row per constraint.
//!
//! Phase one minimizes the sum of artificial variables added to equality
//! rows and to inequality rows whose slack starts infeasible. Pricing is
//! Dantzig's largest reduced cost. The ratio test is Harris's two-pass
//! rule throughout, which keeps pivots large. The tableau is rebuilt from
//! the original rows every few hundred pivots to shed rounding error.
//!
//! Stalling is broken by perturbation: a run of degenerate primal pivots
//! widens the bounds of basic variables by small jittered amounts, and a
//! run of degenerate dual pivots shifts reduced costs the same way. The
//! shifts are removed once the perturbed problem is optimal and the
//! other simplex cleans up. Bland's rule is the last resort.
//!
//! [`LpEngine`] keeps its tableau between solves. After bounds change it
//! restores primal feasibility with a bounded dual simplex from the last
//! basis, or from a stored [`LpBasis`].

use crate::milp::{MilpModel, Relation};

pub const PIVOT_TOL: f64 = 1e-7;
pub const FEAS_TOL: f64 = 1e-7;
const OPT_TOL: f64 = 1e-9;
/// Bound slack of the ratio tests and the dual leaving threshold.
const HARRIS_TOL: f64 = 1e-9;
const BOUND_PERTURB: f64 = 1e-6;
const COST_PERTURB: f64 = 1e-7;
const MAX_ROUNDS: usize = 8;
const DROP_TOL: f64 = 1e-14;
const MAX_REINVERT: usize = 3;
/// Pivots between scheduled refactorizations of the tableau.
const REINVERT_EVERY: usize = 100;
const GEOMETRIC_PASSES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective at `values`; NaN unless optimal.
    pub objective: f64,
    /// One value per model variable.
    pub values: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpOptions {
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { max_iterations: 50_000, bland_after: 50 }
    }
}

pub fn solve_lp(model: &MilpModel) -> LpSolution {
    let bounds: Vec<(f64, f64)> = model.variables().iter().map(|v| (v.lower, v.upper)).collect();
    solve_lp_with(model, &bounds, &LpOptions::default())
}

fn pow2_scale(max_abs: f64) -> f64 {
    if max_abs > 0.0 && max_abs.is_finite() {
        (-max_abs.log2().round()).exp2()
    } else {
        1.0
    }
}

/// Solves the relaxation of `model` with the variable bounds replaced by
/// `bounds`.
pub fn solve_lp_with(model: &MilpModel, bounds: &[(f64, f64)], options: &LpOptions) -> LpSolution {
    assert_eq!(bounds.len(), model.variables().len(), "one bound pair per variable");
    let n_vars = bounds.len();
    let mut values = vec![0.0; n_vars];
    let infeasible = |values: Vec<f64>| LpSolution {
        status: LpStatus::Infeasible,
        objective: f64::NAN,
        values,
        iterations: 0,
    };
    if bounds.iter().any(|&(lo, up)| lo > up + FEAS_TOL) {
        return infeasible(values);
    }

    let mut column_of = vec![usize::MAX; n_vars];
    let mut free = Vec::new();
    for (j, &(lo, up)) in bounds.iter().enumerate() {
        if lo >= up {
            values[j] = lo;
        } else {
            column_of[j] = free.len();
            free.push(j);
        }
    }

    let mut rows: Vec<Row> = Vec::new();
    for row in model.constraints() {
        let sign = if row.relation == Relation::Ge { -1.0 } else { 1.0 };
        let mut rhs = sign * row.rhs;
        let mut terms = Vec::new();
        for &(j, a) in &row.terms {
            match column_of[j] {
                usize::MAX => rhs -= sign * a * values[j],
                col => terms.push((col, sign * a)),
            }
        }
        let equality = row.relation == Relation::Eq;
        if terms.is_empty() {
            let tol = FEAS_TOL * (1.0 + row.rhs.abs());
            if (equality && rhs.abs() > tol) || rhs < -tol {
                return infeasible(values);
            }
            continue;
        }
        rows.push(Row { terms, equality, rhs });
    }

    let col_scale = equilibrate(&mut rows, free.len());

    let mut cost = vec![0.0; free.len()];
    let mut fixed_objective = 0.0;
    for &(j, a) in model.objective() {
        match column_of[j] {
            usize::MAX => fixed_objective += a * values[j],
            col => cost[col] = a * col_scale[col],
        }
    }
    let col_bounds: Vec<(f64, f64)> =
        free.iter().zip(&col_scale).map(|(&j, &s)| (bounds[j].0 / s, bounds[j].1 / s)).collect();

    let mut simplex = Simplex::new(&rows, &col_bounds, &cost, *options);
    let status = simplex.run();
    let mut objective = fixed_objective;
    for (k, &j) in free.iter().enumerate() {
        values[j] = (simplex.value(k) * col_scale[k]).clamp(bounds[j].0, bounds[j].1);
    }
    for &(j, a) in model.objective() {
        if column_of[j] != usize::MAX {
            objective += a * values[j];
        }
    }
    LpSolution {
        status,
        objective: if status == LpStatus::Optimal { objective } else { f64::NAN },
        values,
        iterations: simplex.iterations,
    }
}

/// Re-solves one model under changing variable bounds. After the first
/// solve, each call keeps the previous basis, moves to the new bounds and
/// restores feasibility with the dual simplex. Fixed variables stay in the
/// tableau as columns with equal bounds.
pub struct LpEngine<'a> {
    model: &'a MilpModel,
    options: LpOptions,
    rows: Vec<Row>,
    col_scale: Vec<f64>,
    cost: Vec<f64>,
    warm: Option<Simplex>,
}

impl<'a> LpEngine<'a> {
    pub fn new(model: &'a MilpModel, options: LpOptions) -> Self {
        let mut rows: Vec<Row> = model
            .constraints()
            .iter()
            .map(|row| {
                let sign = if row.relation == Relation::Ge { -1.0 } else { 1.0 };
                Row {
                    terms: row.terms.iter().map(|&(j, a)| (j, sign * a)).collect(),
                    equality: row.relation == Relation::Eq,
                    rhs: sign * row.rhs,
                }
            })
            .collect();
        let n_vars = model.variables().len();
        let col_scale = equilibrate(&mut rows, n_vars);
        let mut cost = vec![0.0; n_vars];
        for &(j, a) in model.objective() {
            cost[j] = a * col_scale[j];
        }
        Self { model, options, rows, col_scale, cost, warm: None }
    }

    pub fn solve(&mut self, bounds: &[(f64, f64)]) -> LpSolution {
        self.solve_from(None, bounds)
    }

    /// Basis of the last solve, if it can seed a later one.
    pub fn basis(&self) -> Option<LpBasis> {
        self.warm.as_ref().map(Simplex::snapshot)
    }

    /// Solves under `bounds`, restarting from `start` when given.
    pub fn solve_from(&mut self, start: Option<&LpBasis>, bounds: &[(f64, f64)]) -> LpSolution {
        assert_eq!(bounds.len(), self.model.variables().len(), "one bound pair per variable");
        if bounds.iter().any(|&(lo, up)| lo > up + FEAS_TOL) {
            return LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                values: bounds.iter().map(|b| b.0).collect(),
                iterations: 0,
            };
        }
        let scaled_bounds: Vec<(f64, f64)> = bounds
            .iter()
            .zip(&self.col_scale)
            .map(|(&(lo, up), &s)| if lo >= up { (lo / s, lo / s) } else { (lo / s, up / s) })
            .collect();

        let mut warm = self.warm.take();
        if let (Some(simplex), Some(basis)) = (warm.as_mut(), start) {
            if !simplex.load(basis) {
                warm = None;
            }
        }
        let (mut simplex, mut status, mut first) = match warm {
            Some(mut simplex) => {
                let first = simplex.iterations;
                simplex.iteration_cap = first + self.options.max_iterations;
                simplex.set_bounds(&scaled_bounds);
                let status = simplex.resolve();
                (simplex, status, first)
            }
            None => self.cold(&scaled_bounds),
        };
        let mut iterations = simplex.iterations - first;
        if status == LpStatus::IterationLimit && first > 0 {
            (simplex, status, first) = self.cold(&scaled_bounds);
            iterations += simplex.iterations - first;
        }

        let mut values = vec![0.0; bounds.len()];
        for (j, v) in values.iter_mut().enumerate() {
            *v = (simplex.value(j) * self.col_scale[j]).clamp(bounds[j].0, bounds[j].1.max(bounds[j].0));
        }
        let objective = self.model.objective_value(&values);
        if !simplex.phase_one && matches!(status, LpStatus::Optimal | LpStatus::Infeasible) {
            self.warm = Some(simplex);
        }
        LpSolution {
            status,
            objective: if status == LpStatus::Optimal { objective } else { f64::NAN },
            values,
            iterations,
        }
    }

    fn cold(&self, scaled_bounds: &[(f64, f64)]) -> (Simplex, LpStatus, usize) {
        let mut simplex = Simplex::new(&self.rows, scaled_bounds, &self.cost, self.options);
        let status = simplex.run();
        (simplex, status, 0)
    }
}

/// Basic columns and the nonbasic columns resting at their upper bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpBasis {
    basic: Vec<u32>,
    at_upper: Vec<u32>,
}

/// Scales rows and columns by powers of two: a few geometric-mean passes
/// narrow the magnitude range, then each row and column is brought to a
/// largest magnitude near one. Returns the column factors: a scaled
/// variable times its factor is the original variable.
fn equilibrate(rows: &mut [Row], n_cols: usize) -> Vec<f64> {
    let mut col_scale = vec![1.0; n_cols];
    let scale_rows = |rows: &mut [Row], geometric: bool| {
        for row in rows.iter_mut() {
            let (lo, hi) = row
                .terms
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), t| (lo.min(t.1.abs()), hi.max(t.1.abs())));
            let s = pow2_scale(if geometric { (lo * hi).sqrt() } else { hi });
            row.terms.iter_mut().for_each(|t| t.1 *= s);
            row.rhs *= s;
        }
    };
    let scale_cols = |rows: &mut [Row], col_scale: &mut [f64], geometric: bool| {
        let mut lo = vec![f64::INFINITY; n_cols];
        let mut hi = vec![0.0f64; n_cols];
        for row in rows.iter() {
            for &(j, a) in &row.terms {
                lo[j] = lo[j].min(a.abs());
                hi[j] = hi[j].max(a.abs());
            }
        }
        let s: Vec<f64> = (0..n_cols)
            .map(|j| pow2_scale(if geometric { (lo[j] * hi[j]).sqrt() } else { hi[j] }))
            .collect();
        for row in rows.iter_mut() {
            row.terms.iter_mut().for_each(|t| t.1 *= s[t.0]);
        }
        col_scale.iter_mut().zip(&s).for_each(|(c, s)| *c *= s);
    };
    for _ in 0..GEOMETRIC_PASSES {
        scale_rows(rows, true);
        scale_cols(rows, &mut col_scale, true);
    }
    scale_rows(rows, false);
    scale_cols(rows, &mut col_scale, false);
    col_scale
}

struct Row {
    terms: Vec<(usize, f64)>,
    equality: bool,
    rhs: f64,
}

/// Bounded-variable tableau. Columns are the structural variables, one
/// slack per inequality row, then artificials.
struct Simplex {
    m: usize,
    n: usize,
    first_art: usize,
    options: LpOptions,
    /// Iteration count at which the current solve gives up.
    iteration_cap: usize,
    original: Vec<f64>,
    /// Row holding the only nonzero of each original column, if any.
    singleton_row: Vec<Option<usize>>,
    rhs: Vec<f64>,
    tab: Vec<f64>,
    /// Scratch tableau for refactorization.
    work: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    phase_one: bool,
    cost: Vec<f64>,
    /// Added to `cost` while dual degeneracy is being broken.
    cost_shift: Vec<f64>,
    /// True bounds while basic bounds are widened against primal stalling.
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    d: Vec<f64>,
    /// Dual Devex reference weights, one per row.
    row_weight: Vec<f64>,
    iterations: usize,
    pivots_at_reinvert: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved { degenerate: bool },
}

/// Deterministic value in [0.5, 1) per column.
fn jitter(j: usize) -> f64 {
    let mut z = (j as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    0.5 + 0.5 * (z >> 11) as f64 / (1u64 << 53) as f64
}

fn nearest_bound(lo: f64, up: f64, x: f64) -> f64 {
    match (lo.is_finite(), up.is_finite()) {
        (true, true) if (x - lo).abs() <= (up - x).abs() => lo,
        (true, true) => up,
        (true, false) => lo,
        (false, true) => up,
        (false, false) => 0.0,
    }
}

impl Simplex {
    fn new(rows: &[Row], bounds: &[(f64, f64)], cost: &[f64], options: LpOptions) -> Self {
        let m = rows.len();
        let n_struct = bounds.len();
        let mut lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let mut upper: Vec<f64> = bounds.iter().map(|b| b.1).collect();
        let mut x: Vec<f64> = bounds
            .iter()
            .map(|&(lo, up)| if lo.is_finite() { lo } else if up.is_finite() { up } else { 0.0 })
            .collect();

        let residual: Vec<f64> = rows
            .iter()
            .map(|r| r.rhs - r.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>())
            .collect();
        let n_slack = rows.iter().filter(|r| !r.equality).count();
        let first_art = n_struct + n_slack;
        let needs_art: Vec<bool> =
            rows.iter().zip(&residual).map(|(r, &res)| r.equality || res < 0.0).collect();
        let n = first_art + needs_art.iter().filter(|&&a| a).count();
        lower.resize(n, 0.0);
        upper.resize(n, f64::INFINITY);
        x.resize(n, 0.0);

        let mut original = vec![0.0; m * n];
        let mut rhs = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut beta = vec![0.0; m];
        let mut tab = vec![0.0; m * n];
        let (mut next_slack, mut next_art) = (n_struct, first_art);
        for (i, r) in rows.iter().enumerate() {
            let row = &mut original[i * n..(i + 1) * n];
            for &(j, a) in &r.terms {
                row[j] = a;
            }
            let slack = (!r.equality).then(|| {
                row[next_slack] = 1.0;
                next_slack += 1;
                next_slack - 1
            });
            rhs[i] = r.rhs;
            // B is diagonal with ±1 entries, so B⁻¹A is A with negated rows
            let sign = if residual[i] < 0.0 { -1.0 } else { 1.0 };
            if needs_art[i] {
                row[next_art] = sign;
                basis[i] = next_art;
                beta[i] = residual[i].abs();
                next_art += 1;
            } else {
                basis[i] = slack.expect("inequality row");
                beta[i] = residual[i];
            }
            for (t, &a) in tab[i * n..(i + 1) * n].iter_mut().zip(row.iter()) {
                *t = sign * a;
            }
        }
        let mut row_of = vec![usize::MAX; n];
        for (i, &b) in basis.iter().enumerate() {
            row_of[b] = i;
        }
        let mut full_cost = cost.to_vec();
        full_cost.resize(n, 0.0);
        let mut singleton_row = vec![None; n];
        for (j, slot) in singleton_row.iter_mut().enumerate() {
            let mut rows = (0..m).filter(|&i| original[i * n + j] != 0.0);
            if let (Some(i), None) = (rows.next(), rows.next()) {
                *slot = Some(i);
            }
        }
        let mut simplex = Simplex {
            m,
            n,
            first_art,
            options,
            iteration_cap: options.max_iterations,
            original,
            singleton_row,
            rhs,
            work: vec![0.0; tab.len()],
            tab,
            beta,
            basis,
            row_of,
            lower,
            upper,
            x,
            phase_one: n > first_art,
            cost: full_cost,
            cost_shift: vec![0.0; n],
            saved_bounds: None,
            d: vec![0.0; n],
            row_weight: vec![1.0; m],
            iterations: 0,
            pivots_at_reinvert: 0,
        };
        simplex.price();
        simplex
    }

    fn phase_cost(&self, j: usize) -> f64 {
        let base = if self.phase_one {
            if j >= self.first_art { 1.0 } else { 0.0 }
        } else {
            self.cost[j]
        };
        base + self.cost_shift[j]
    }

    /// Recomputes reduced costs `d = c - c_B B⁻¹ A` for the current phase.
    fn price(&mut self) {
        let n = self.n;
        for j in 0..n {
            self.d[j] = self.phase_cost(j);
        }
        for i in 0..self.m {
            let cb = self.phase_cost(self.basis[i]);
            if cb != 0.0 {
                for (d, &t) in self.d.iter_mut().zip(&self.tab[i * n..(i + 1) * n]) {
                    *d -= cb * t;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn infeasibility(&self) -> f64 {
        (self.first_art..self.n).map(|j| self.value(j).max(0.0)).sum()
    }

    fn run(&mut self) -> LpStatus {
        if self.phase_one {
            if let Some(status) = self.reoptimize(false) {
                return status;
            }
            if self.infeasibility() > FEAS_TOL {
                if !self.reinvert() {
                    return LpStatus::Infeasible;
                }
                if let Some(status) = self.reoptimize(true) {
                    return status;
                }
                if self.infeasibility() > FEAS_TOL {
                    return LpStatus::Infeasible;
                }
            }
            for j in self.first_art..self.n {
                self.retire(j);
            }
            self.phase_one = false;
            self.price();
        }
        self.finish(false)
    }

    /// Re-optimizes after a bound change from a dual feasible basis.
    fn resolve(&mut self) -> LpStatus {
        self.finish(true)
    }

    fn finish(&mut self, dual_first: bool) -> LpStatus {
        let mut dual = dual_first;
        for attempt in 0..=MAX_REINVERT {
            if let Some(status) = self.reoptimize(dual) {
                return status;
            }
            if self.rows_satisfied() || attempt == MAX_REINVERT || !self.reinvert() {
                break;
            }
            dual = true;
        }
        LpStatus::Optimal
    }

    /// Alternates dual and primal passes until neither needed a
    /// perturbation, so the final basis is optimal for the true data.
    fn reoptimize(&mut self, mut dual: bool) -> Option<LpStatus> {
        for _ in 0..MAX_ROUNDS {
            if dual {
                let status = self.dual_optimize();
                self.restore_costs();
                if status.is_some() {
                    return status;
                }
            }
            let status = self.optimize();
            let widened = self.restore_bounds();
            if status.is_some() || !widened {
                return status;
            }
            dual = true;
        }
        None
    }

    fn move_nonbasic(&mut self, j: usize, target: f64) {
        let delta = target - self.x[j];
        if delta != 0.0 {
            let n = self.n;
            for i in 0..self.m {
                let a = self.tab[i * n + j];
                if a != 0.0 {
                    self.beta[i] -= a * delta;
                }
            }
            self.x[j] = target;
        }
    }

    /// Replaces the structural bounds while keeping the basis. Nonbasic
    /// variables move to the bound their reduced cost favors, so the basis
    /// stays dual feasible; basic values are updated to match.
    fn set_bounds(&mut self, bounds: &[(f64, f64)]) {
        for (j, &(lo, up)) in bounds.iter().enumerate() {
            self.lower[j] = lo;
            self.upper[j] = up;
            if self.row_of[j] != usize::MAX {
                continue;
            }
            let d = self.d[j];
            let target = if lo == up || (d > OPT_TOL && lo.is_finite()) {
                lo
            } else if d < -OPT_TOL && up.is_finite() {
                up
            } else {
                nearest_bound(lo, up, self.x[j])
            };
            self.move_nonbasic(j, target);
        }
    }

    fn perturb_bounds(&mut self) {
        self.saved_bounds = Some((self.lower.clone(), self.upper.clone()));
        for &b in &self.basis {
            if b >= self.first_art || self.lower[b] == self.upper[b] {
                continue;
            }
            let delta = BOUND_PERTURB * jitter(b);
            if self.lower[b].is_finite() {
                self.lower[b] -= delta * (1.0 + self.lower[b].abs());
            }
            if self.upper[b].is_finite() {
                self.upper[b] += delta * (1.0 + self.upper[b].abs());
            }
        }
    }

    /// Puts back the true bounds. Returns whether they had been widened.
    fn restore_bounds(&mut self) -> bool {
        let Some((lower, upper)) = self.saved_bounds.take() else { return false };
        self.lower = lower;
        self.upper = upper;
        for j in 0..self.n {
            if self.row_of[j] == usize::MAX && self.x[j] != self.lower[j] && self.x[j] != self.upper[j] {
                let target = nearest_bound(self.lower[j], self.upper[j], self.x[j]);
                self.move_nonbasic(j, target);
            }
        }
        true
    }

    fn perturb_costs(&mut self) {
        let scale = 1.0 + (0..self.n).map(|j| self.phase_cost(j).abs()).fold(0.0, f64::max);
        for j in 0..self.n {
            if self.row_of[j] != usize::MAX || self.lower[j] == self.upper[j] {
                continue;
            }
            let delta = COST_PERTURB * scale * jitter(j);
            let shift = if self.x[j] == self.lower[j] {
                delta
            } else if self.x[j] == self.upper[j] {
                -delta
            } else {
                continue;
            };
            self.cost_shift[j] += shift;
            self.d[j] += shift;
        }
    }

    fn restore_costs(&mut self) {
        if self.cost_shift.iter().any(|&s| s != 0.0) {
            self.cost_shift.fill(0.0);
            self.price();
        }
    }

    /// Bounded dual simplex from a dual feasible basis. Returns `None` once
    /// the basis is primal feasible.
    fn dual_optimize(&mut self) -> Option<LpStatus> {
        let n = self.n;
        let mut stall = 0;
        loop {
            if self.iterations >= self.iteration_cap {
                return Some(LpStatus::IterationLimit);
            }
            self.refresh();
            let perturbed = self.cost_shift.iter().any(|&s| s != 0.0);
            if stall >= self.options.bland_after && !perturbed {
                self.perturb_costs();
                stall = 0;
            }
            let bland = stall >= self.options.bland_after;

            // leaving row: the largest bound violation, or the lowest
            // violating variable once stalled
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for i in 0..self.m {
                let b = self.basis[i];
                let (violation, target) = if self.beta[i] < self.lower[b] {
                    (self.lower[b] - self.beta[i], self.lower[b])
                } else if self.beta[i] > self.upper[b] {
                    (self.beta[i] - self.upper[b], self.upper[b])
                } else {
                    continue;
                };
                if violation <= HARRIS_TOL {
                    continue;
                }
                let score = violation * violation / self.row_weight[i];
                let better = if bland {
                    leave.is_none_or(|(r, _)| b < self.basis[r])
                } else {
                    score > worst
                };
                if better {
                    worst = score;
                    leave = Some((i, target));
                }
            }
            let (r, target) = leave?;
            let increase = target > self.beta[r];
            let row = &self.tab[r * n..(r + 1) * n];

            // candidates move the leaving variable toward its violated
            // bound; the ratio uses the reduced cost signed by direction
            let candidate = |j: usize| -> Option<(f64, f64)> {
                if self.row_of[j] != usize::MAX || self.lower[j] == self.upper[j] {
                    return None;
                }
                let a = row[j];
                // x_B = beta - a * dx_j
                let s = if increase { -a } else { a };
                let dual = if self.x[j] == self.lower[j] {
                    (s > PIVOT_TOL).then_some(self.d[j])?
                } else if self.x[j] == self.upper[j] {
                    (s < -PIVOT_TOL).then_some(-self.d[j])?
                } else {
                    (s.abs() > PIVOT_TOL).then_some(self.d[j].abs())?
                };
                Some((dual.max(0.0), a.abs()))
            };
            let mut theta = f64::INFINITY;
            for j in 0..n {
                if let Some((dual, a)) = candidate(j) {
                    theta = theta.min((dual + OPT_TOL) / a);
                }
            }
            if !theta.is_finite() {
                return Some(LpStatus::Infeasible);
            }
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..n {
                if let Some((dual, a)) = candidate(j) {
                    if dual / a <= theta && enter.is_none_or(|(_, _, best)| a > best) {
                        enter = Some((j, dual, a));
                    }
                }
            }
            let (q, dual, a) = enter.expect("a column attains theta");
            stall = if dual / a <= 1e-12 { stall + 1 } else { 0 };

            let alpha = row[q];
            let delta = (self.beta[r] - target) / alpha;
            let w_r = self.row_weight[r];
            for i in 0..self.m {
                let a = self.tab[i * n + q];
                if a != 0.0 {
                    self.beta[i] -= a * delta;
                    let ratio = a / alpha;
                    self.row_weight[i] = self.row_weight[i].max(ratio * ratio * w_r);
                }
            }
            self.row_weight[r] = (w_r / (alpha * alpha)).max(1.0);
            let out = self.basis[r];
            self.row_of[out] = usize::MAX;
            self.x[out] = target;
            self.basis[r] = q;
            self.row_of[q] = r;
            self.beta[r] = self.x[q] + delta;
            self.pivot(r, q);
            if out >= self.first_art {
                self.retire(out);
            }
            self.iterations += 1;
        }
    }

    fn snapshot(&self) -> LpBasis {
        let at_upper = (0..self.n)
            .filter(|&j| self.row_of[j] == usize::MAX && self.x[j] == self.upper[j] && self.lower[j] < self.upper[j])
            .map(|j| j as u32)
            .collect();
        LpBasis { basic: self.basis.iter().map(|&b| b as u32).collect(), at_upper }
    }

    /// Installs `basis` and refactorizes. Returns false, leaving the
    /// tableau unusable, if the basis is singular.
    fn load(&mut self, basis: &LpBasis) -> bool {
        if basis.basic.iter().zip(&self.basis).all(|(&a, &b)| a as usize == b) {
            return true;
        }
        self.row_of.fill(usize::MAX);
        self.row_weight.fill(1.0);
        for (i, &b) in basis.basic.iter().enumerate() {
            self.basis[i] = b as usize;
            self.row_of[b as usize] = i;
        }
        for j in 0..self.n {
            if self.row_of[j] == usize::MAX {
                self.x[j] = nearest_bound(self.lower[j], self.upper[j], f64::NEG_INFINITY);
            }
        }
        for &j in &basis.at_upper {
            let j = j as usize;
            if self.row_of[j] == usize::MAX && self.upper[j].is_finite() {
                self.x[j] = self.upper[j];
            }
        }
        self.reinvert()
    }

    /// Refactorizes once enough pivots have accumulated since the last
    /// refactorization. A singular result leaves the tableau as it was.
    fn refresh(&mut self) {
        if self.iterations - self.pivots_at_reinvert >= REINVERT_EVERY && !self.reinvert() {
            self.pivots_at_reinvert = self.iterations;
        }
    }

    /// Pins an artificial at zero. Once nonbasic its column is dead.
    fn retire(&mut self, j: usize) {
        self.upper[j] = 0.0;
        if let Some((_, upper)) = self.saved_bounds.as_mut() {
            upper[j] = 0.0;
        }
        if self.row_of[j] == usize::MAX {
            self.x[j] = 0.0;
            for i in 0..self.m {
                self.tab[i * self.n + j] = 0.0;
            }
            self.d[j] = 0.0;
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.row_of[j] {
            usize::MAX => self.x[j],
            i => self.beta[i],
        }
    }

    /// Iterates to optimality of the current phase. Returns a terminal
    /// status other than optimal, or `None` at optimality.
    fn optimize(&mut self) -> Option<LpStatus> {
        let mut stall = 0;
        loop {
            if self.iterations >= self.iteration_cap {
                return Some(LpStatus::IterationLimit);
            }
            self.refresh();
            if stall >= self.options.bland_after && self.saved_bounds.is_none() {
                self.perturb_bounds();
                stall = 0;
            }
            match self.step(stall >= self.options.bland_after) {
                Step::Optimal => return None,
                // phase one is bounded below by zero
                Step::Unbounded if self.phase_one => return None,
                Step::Unbounded => return Some(LpStatus::Unbounded),
                Step::Moved { degenerate } => {
                    self.iterations += 1;
                    stall = if degenerate { stall + 1 } else { 0 };
                }
            }
        }
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_d = 0.0;
        for j in 0..self.n {
            if self.row_of[j] != usize::MAX || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.d[j];
            let dir = if d < -OPT_TOL && self.x[j] < self.upper[j] {
                1.0
            } else if d > OPT_TOL && self.x[j] > self.lower[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_d {
                best = Some((j, dir));
                best_d = d.abs();
            }
        }
        best
    }

    /// Step length at which row `i`'s basic variable reaches a bound when
    /// the entering variable moves with signed column entry `alpha`, with
    /// the bound relaxed by `slack`.
    fn row_ratio(&self, i: usize, alpha: f64, slack: f64) -> Option<(f64, f64)> {
        let b = self.basis[i];
        let (gap, bound) = if alpha > PIVOT_TOL {
            (self.beta[i] - self.lower[b], self.lower[b])
        } else if alpha < -PIVOT_TOL {
            (self.upper[b] - self.beta[i], self.upper[b])
        } else {
            return None;
        };
        gap.is_finite().then(|| ((gap + slack) / alpha.abs(), bound))
    }

    fn step(&mut self, bland: bool) -> Step {
        let Some((j, dir)) = self.entering(bland) else {
            return Step::Optimal;
        };
        let n = self.n;
        let column: Vec<f64> = (0..self.m).map(|i| dir * self.tab[i * n + j]).collect();
        let flip = self.upper[j] - self.lower[j];

        let mut leave: Option<(usize, f64, f64)> = None;
        let t = {
            // pass one: the largest step keeping every basic variable within
            // its tolerance-widened bounds
            let mut theta = flip;
            for (i, &alpha) in column.iter().enumerate() {
                if let Some((ratio, _)) = self.row_ratio(i, alpha, HARRIS_TOL) {
                    theta = theta.min(ratio);
                }
            }
            if !theta.is_finite() {
                return Step::Unbounded;
            }
            if flip <= theta {
                flip
            } else {
                // pass two: among rows blocking within theta, the largest pivot
                for (i, &alpha) in column.iter().enumerate() {
                    let Some((ratio, bound)) = self.row_ratio(i, alpha, 0.0) else { continue };
                    if ratio <= theta && leave.is_none_or(|(_, a, _)| alpha.abs() > a.abs()) {
                        leave = Some((i, alpha, bound));
                    }
                }
                let (r, alpha, _) = leave.expect("a row attains theta");
                self.row_ratio(r, alpha, 0.0).expect("blocking row").0.max(0.0)
            }
        };

        for (i, &alpha) in column.iter().enumerate() {
            if alpha != 0.0 {
                self.beta[i] -= t * alpha;
            }
        }
        let entering_value = self.x[j] + dir * t;
        match leave {
            None => {
                self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
            }
            Some((r, _, bound)) => {
                let out = self.basis[r];
                self.row_of[out] = usize::MAX;
                self.x[out] = bound;
                self.basis[r] = j;
                self.row_of[j] = r;
                self.beta[r] = entering_value;
                self.pivot(r, j);
                if out >= self.first_art {
                    self.retire(out);
                }
            }
        }
        Step::Moved { degenerate: t <= 1e-12 }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let inv = 1.0 / self.tab[r * n + j];
        let (before, rest) = self.tab.split_at_mut(r * n);
        let (pivot_row, after) = rest.split_at_mut(n);
        let mut nz = Vec::new();
        for (k, v) in pivot_row.iter_mut().enumerate() {
            if *v != 0.0 {
                *v *= inv;
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                } else {
                    nz.push(k);
                }
            }
        }
        pivot_row[j] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[j];
            if f != 0.0 {
                for &k in &nz {
                    let v = row[k] - f * pivot_row[k];
                    row[k] = if v.abs() < DROP_TOL { 0.0 } else { v };
                }
                row[j] = 0.0;
            }
        };
        before.chunks_exact_mut(n).for_each(eliminate);
        after.chunks_exact_mut(n).for_each(eliminate);
        eliminate(&mut self.d);
    }

    fn rows_satisfied(&self) -> bool {
        let values: Vec<f64> = (0..self.n).map(|j| self.value(j)).collect();
        (0..self.m).all(|i| {
            let row = &self.original[i * self.n..(i + 1) * self.n];
            let activity: f64 = row.iter().zip(&values).map(|(a, v)| a * v).sum();
            (activity - self.rhs[i]).abs() <= FEAS_TOL * (1.0 + self.rhs[i].abs())
        })
    }

    /// Rebuilds the tableau, basic values and reduced costs from the
    /// original matrix for the current basis. Returns false if the basis
    /// is numerically singular.
    ///
    /// Basic columns with a single nonzero are pivoted first, which needs
    /// no elimination; the rest use Gauss-Jordan steps with partial
    /// pivoting over the nonzeros of each pivot row.
    fn reinvert(&mut self) -> bool {
        let (m, n) = (self.m, self.n);
        let mut tab = std::mem::take(&mut self.work);
        tab.copy_from_slice(&self.original);
        let mut rhs = self.rhs.clone();
        for j in 0..n {
            let xj = self.x[j];
            if self.row_of[j] == usize::MAX && xj != 0.0 {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= tab[i * n + j] * xj;
                }
            }
        }
        let mut assigned = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        let mut rest = Vec::new();
        for &col in &self.basis {
            match self.singleton_row[col] {
                Some(r) if !assigned[r] => {
                    let inv = 1.0 / tab[r * n + col];
                    for v in &mut tab[r * n..(r + 1) * n] {
                        *v *= inv;
                    }
                    rhs[r] *= inv;
                    assigned[r] = true;
                    new_basis[r] = col;
                }
                _ => rest.push(col),
            }
        }
        let mut nz = Vec::with_capacity(n);
        let ok = rest.iter().all(|&col| {
            let Some(r) = (0..m)
                .filter(|&i| !assigned[i])
                .max_by(|&a, &b| tab[a * n + col].abs().total_cmp(&tab[b * n + col].abs()))
            else {
                return false;
            };
            if tab[r * n + col].abs() < 1e-11 {
                return false;
            }
            let inv = 1.0 / tab[r * n + col];
            nz.clear();
            for (k, v) in tab[r * n..(r + 1) * n].iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    nz.push(k);
                }
            }
            rhs[r] *= inv;
            let (before, after) = tab.split_at_mut(r * n);
            let (pivot_row, after) = after.split_at_mut(n);
            let mut eliminate = |i: usize, row: &mut [f64]| {
                let f = row[col];
                if f != 0.0 {
                    for &k in &nz {
                        row[k] -= f * pivot_row[k];
                    }
                    row[col] = 0.0;
                    rhs[i] -= f * rhs[r];
                }
            };
            for (i, row) in before.chunks_exact_mut(n).enumerate() {
                eliminate(i, row);
            }
            for (i, row) in after.chunks_exact_mut(n).enumerate() {
                eliminate(r + 1 + i, row);
            }
            assigned[r] = true;
            new_basis[r] = col;
            true
        });
        if !ok {
            self.work = tab;
            return false;
        }
        for j in self.first_art..n {
            if self.row_of[j] == usize::MAX && self.upper[j] == 0.0 {
                for i in 0..m {
                    tab[i * n + j] = 0.0;
                }
            }
        }
        self.work = std::mem::replace(&mut self.tab, tab);
        self.beta = rhs;
        self.basis = new_basis;
        for (i, &b) in self.basis.iter().enumerate() {
            self.row_of[b] = i;
        }
        self.price();
        self.pivots_at_reinvert = self.iterations;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::VarKind;

    fn one_var(rows: &[(Relation, f64)]) -> MilpModel {
        let mut m = MilpModel::new("t");
        let x = m.add_var("x", 0.0, 10.0, VarKind::Continuous);
        for (k, &(rel, b)) in rows.iter().enumerate() {
            m.add_constraint(format!("r{k}"), [(x, 1.0)], rel, b);
        }
        m.set_objective([(x, 1.0)]);
        m.finish()
    }

    #[test]
    fn lower_bound_row() {
        let sol = solve_lp(&one_var(&[(Relation::Ge, 3.0)]));
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows() {
        let sol = solve_lp(&one_var(&[(Relation::Le, 1.0), (Relation::Ge, 2.0)]));
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn small_two_dimensional() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6  ->  x = 1.6, y = 1.2
        let mut m = MilpModel::new("t");
        let x = m.add_var("x", 0.0, f64::INFINITY, VarKind::Continuous);
        let y = m.add_var("y", 0.0, f64::INFINITY, VarKind::Continuous);
        m.add_constraint("a", [(x, 1.0), (y, 2.0)], Relation::Le, 4.0);
        m.add_constraint("b", [(x, 3.0), (y, 1.0)], Relation::Le, 6.0);
        m.set_objective([(x, -1.0), (y, -1.0)]);
        let sol = solve_lp(&m.finish());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[0] - 1.6).abs() < 1e-9);
        assert!((sol.values[1] - 1.2).abs() < 1e-9);
    }

    #[test]
    fn unbounded() {
        let mut m = MilpModel::new("t");
        let x = m.add_var("x", 0.0, f64::INFINITY, VarKind::Continuous);
        m.add_constraint("a", [(x, 1.0)], Relation::Ge, 1.0);
        m.set_objective([(x, -1.0)]);
        assert_eq!(solve_lp(&m.finish()).status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_free_variable() {
        // min y s.t. x - y = 2, x in [-5, 5], y free  ->  y = -7
        let mut m = MilpModel::new("t");
        let x = m.add_var("x", -5.0, 5.0, VarKind::Continuous);
        let y = m.add_var("y", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous);
        m.add_constraint("a", [(x, 1.0), (y, -1.0)], Relation::Eq, 2.0);
        m.set_objective([(y, 1.0)]);
        let sol = solve_lp(&m.finish());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 7.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_variables_are_substituted() {
        let mut m = MilpModel::new("t");
        let x = m.add_var("x", 2.0, 2.0, VarKind::Continuous);
        let y = m.add_var("y", 0.0, 10.0, VarKind::Continuous);
        m.add_constraint("a", [(x, 1.0), (y, 1.0)], Relation::Ge, 5.0);
        m.set_objective([(x, 1.0), (y, 1.0)]);
        let sol = solve_lp(&m.finish());
        assert_eq!(sol.values, vec![2.0, 3.0]);
        assert!((sol.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn bound_override() {
        let m = one_var(&[(Relation::Ge, 3.0)]);
        let sol = solve_lp_with(&m, &[(4.0, 10.0)], &LpOptions::default());
        assert!((sol.objective - 4.0).abs() < 1e-9);
        let sol = solve_lp_with(&m, &[(0.0, 2.0)], &LpOptions::default());
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn iteration_cap() {
        let m = one_var(&[(Relation::Ge, 3.0)]);
        let options = LpOptions { max_iterations: 0, ..LpOptions::default() };
        assert_eq!(solve_lp_with(&m, &[(0.0, 10.0)], &options).status, LpStatus::IterationLimit);
    }

    #[test]
    fn warm_solves_match_cold_solves() {
        use crate::generate::{generate_instance, GeneratorConfig};
        use crate::milp::build_f3;

        let inst = generate_instance(3, &GeneratorConfig::new(6, 3)).unwrap();
        let model = build_f3(&inst);
        let base: Vec<(f64, f64)> = model.variables().iter().map(|v| (v.lower, v.upper)).collect();
        let binaries: Vec<usize> =
            (0..base.len()).filter(|&j| model.variables()[j].kind == VarKind::Binary).collect();
        let mut engine = LpEngine::new(&model, LpOptions::default());
        let mut state: u64 = 12345;
        let mut stored = None;
        for step in 0..40 {
            let mut bounds = base.clone();
            for &j in &binaries {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                match (state >> 33) % 25 {
                    0 => bounds[j] = (0.0, 0.0),
                    1 => bounds[j] = (1.0, 1.0),
                    _ => {}
                }
            }
            let cold = solve_lp_with(&model, &bounds, &LpOptions::default());
            let warm = if step % 3 == 0 { engine.solve_from(stored.as_ref(), &bounds) } else { engine.solve(&bounds) };
            assert_eq!(cold.status, warm.status, "step {step}");
            if cold.status == LpStatus::Optimal {
                let tol = 1e-6 * cold.objective.abs().max(1.0);
                assert!((cold.objective - warm.objective).abs() <= tol, "step {step}");
            }
            if step % 5 == 0 {
                stored = engine.basis();
            }
        }
    }
}
