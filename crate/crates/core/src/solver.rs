//! The typical table and its dual.
//!
//! The typical table `Z` maximizes `g(X)` over the transportation polytope.
//! It is recovered from the minimizer `(s, t)` of the convex function
//!
//! ```text
//! G(s, t) = sum r_i s_i + sum c_j t_j - sum_ij ln(1 - exp(-s_i - t_j))
//! ```
//!
//! through `z_ij = 1 / (exp(s_i + t_j) - 1)`, and `min G = g(Z) = ln rho(R, C)`,
//! an upper bound on the logarithm of the number of tables.
//!
//! `G` is minimized by exact alternating block minimization: with `t` fixed,
//! each `s_i` solves the monotone equation `sum_j z_ij(s_i) = r_i`, and
//! symmetrically for `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{g_value, smoothness_delta, Margins, RealMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

/// Dual point `(s, t)`; `xi_i = exp(-s_i)` and `eta_j = exp(-t_j)` give the
/// product form `z_ij = xi_i eta_j / (1 - xi_i eta_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualVariables {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

impl DualVariables {
    /// `s_i = ln(1 + n / r_i) / 2`, `t_j = ln(1 + m / c_j) / 2`; optimal for
    /// constant margins.
    pub fn initial(margins: &Margins) -> Self {
        let (m, n) = (margins.m() as f64, margins.n() as f64);
        DualVariables {
            s: margins.rows().iter().map(|&r| 0.5 * (n / r as f64).ln_1p()).collect(),
            t: margins.cols().iter().map(|&c| 0.5 * (m / c as f64).ln_1p()).collect(),
        }
    }

    /// `(s + c, t - c)`, which leaves every `s_i + t_j` unchanged.
    pub fn shifted(&self, c: f64) -> Self {
        DualVariables {
            s: self.s.iter().map(|v| v + c).collect(),
            t: self.t.iter().map(|v| v - c).collect(),
        }
    }

    pub fn in_domain(&self) -> bool {
        let min_s = self.s.iter().copied().fold(f64::INFINITY, f64::min);
        let min_t = self.t.iter().copied().fold(f64::INFINITY, f64::min);
        min_s + min_t > 0.0
    }

    fn check_shape(&self, margins: &Margins) -> Result<()> {
        if self.s.len() != margins.m() || self.t.len() != margins.n() {
            return Err(Error::ShapeMismatch {
                expected: (margins.m(), margins.n()),
                got: (self.s.len(), self.t.len()),
            });
        }
        Ok(())
    }

    fn fix_gauge(&mut self) {
        let min_s = self.s.iter().copied().fold(f64::INFINITY, f64::min);
        let min_t = self.t.iter().copied().fold(f64::INFINITY, f64::min);
        let c = 0.5 * (min_s - min_t);
        self.s.iter_mut().for_each(|v| *v -= c);
        self.t.iter_mut().for_each(|v| *v += c);
    }

    /// The matrix `1 / (exp(s_i + t_j) - 1)`.
    pub fn table(&self) -> RealMatrix {
        RealMatrix::from_fn(self.s.len(), self.t.len(), |i, j| {
            entry_from_exponent(self.s[i] + self.t[j])
        })
        .expect("duals must lie in the domain s_i + t_j > 0")
    }
}

/// `1 / (e^x - 1)` for `x > 0`.
pub fn entry_from_exponent(x: f64) -> f64 {
    if x > 1.0 {
        let e = (-x).exp();
        e / (1.0 - e)
    } else {
        1.0 / x.exp_m1()
    }
}

/// `ln(1 - e^{-x})` for `x > 0`.
pub(crate) fn ln_one_minus_exp_neg(x: f64) -> f64 {
    if x > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

pub fn dual_objective(duals: &DualVariables, margins: &Margins) -> Result<f64> {
    duals.check_shape(margins)?;
    let mut value = 0.0;
    for (&s, &r) in duals.s.iter().zip(margins.rows()) {
        value += r as f64 * s;
    }
    for (&t, &c) in duals.t.iter().zip(margins.cols()) {
        value += c as f64 * t;
    }
    for (i, &s) in duals.s.iter().enumerate() {
        for (j, &t) in duals.t.iter().enumerate() {
            let x = s + t;
            if !(x > 0.0) {
                return Err(Error::DomainViolation(format!(
                    "s_{} + t_{} = {x} is not positive",
                    i + 1,
                    j + 1
                )));
            }
            value -= ln_one_minus_exp_neg(x);
        }
    }
    Ok(value)
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Target for the largest relative margin error.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Starting point; defaults to [`DualVariables::initial`].
    pub initial: Option<DualVariables>,
    /// Record the dual objective after every sweep.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            initial: None,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TypicalTable {
    pub z: RealMatrix,
    pub duals: DualVariables,
    pub margins: Margins,
    /// Largest of `|rowsum_i(Z) - r_i| / max(1, r_i)` and the column analog.
    pub residual: f64,
    pub g_of_z: f64,
    pub sweeps: usize,
    /// Dual objective after each sweep (empty unless requested).
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl TypicalTable {
    fn from_duals(duals: DualVariables, margins: &Margins, sweeps: usize, trace: Vec<f64>) -> Self {
        let z = duals.table();
        let residual = margin_residual(&z, margins);
        TypicalTable {
            g_of_z: g_value(&z),
            z,
            duals,
            margins: margins.clone(),
            residual,
            sweeps,
            objective_trace: trace,
        }
    }
}

/// Largest relative deviation of the row and column sums of `z` from the
/// margins, each scaled by `max(1, target)`.
pub fn margin_residual(z: &RealMatrix, margins: &Margins) -> f64 {
    let err = |sums: Vec<f64>, targets: &[u64]| {
        sums.iter()
            .zip(targets)
            .map(|(s, &r)| (s - r as f64).abs() / (r as f64).max(1.0))
            .fold(0.0, f64::max)
    };
    err(z.row_sums(), margins.rows()).max(err(z.col_sums(), margins.cols()))
}

/// Solves `sum_k 1/(exp(v + others_k) - 1) = target` for `v`.
///
/// The left side is convex and strictly decreasing on `v > -min(others)`, so
/// Newton steps taken from the left of the root stay on the left; steps that
/// leave the current bracket are replaced by bisection.
fn solve_coordinate(target: f64, others: &[f64], start: f64) -> f64 {
    let pole = -others.iter().copied().fold(f64::INFINITY, f64::min);
    let eval = |v: f64| {
        let (mut f, mut df) = (-target, 0.0);
        for &o in others {
            let z = entry_from_exponent(v + o);
            f += z;
            df -= z * (1.0 + z);
        }
        (f, df)
    };
    // Rounding in a sum of `others.len()` terms.
    let f_tol = 8.0 * f64::EPSILON * target * others.len() as f64;
    let (mut lo, mut hi) = (pole, f64::INFINITY);
    let mut v = if start > pole { start } else { pole + 1.0 };
    for _ in 0..500 {
        let (f, df) = eval(v);
        if f.abs() <= f_tol {
            return v;
        }
        if f > 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let newton = v - f / df;
        let next = if newton > lo && newton < hi {
            newton
        } else if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            v + (v - pole).max(1.0)
        };
        if (next - v).abs() <= 4.0 * f64::EPSILON * v.abs().max(1e-300) {
            return next;
        }
        if hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            return next;
        }
        v = next;
    }
    v
}

pub fn solve_typical(margins: &Margins, tol: f64, max_iter: usize) -> Result<TypicalTable> {
    solve_typical_with(
        margins,
        &SolverOptions {
            tol,
            max_sweeps: max_iter,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_typical_with(margins: &Margins, opts: &SolverOptions) -> Result<TypicalTable> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut duals = match &opts.initial {
        Some(d) => {
            d.check_shape(margins)?;
            if !d.in_domain() {
                return Err(Error::DomainViolation("initial duals outside s_i + t_j > 0".into()));
            }
            d.clone()
        }
        None => DualVariables::initial(margins),
    };
    let rows: Vec<f64> = margins.rows().iter().map(|&r| r as f64).collect();
    let cols: Vec<f64> = margins.cols().iter().map(|&c| c as f64).collect();
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(dual_objective(&duals, margins)?);
    }

    let mut best: Option<(f64, DualVariables)> = None;
    for sweep in 1..=opts.max_sweeps {
        for (i, &r) in rows.iter().enumerate() {
            duals.s[i] = solve_coordinate(r, &duals.t, duals.s[i]);
        }
        for (j, &c) in cols.iter().enumerate() {
            duals.t[j] = solve_coordinate(c, &duals.s, duals.t[j]);
        }
        duals.fix_gauge();
        if opts.record_trace {
            trace.push(dual_objective(&duals, margins)?);
        }

        let residual = margin_residual(&duals.table(), margins);
        if residual <= opts.tol {
            log::debug!("typical table converged after {sweep} sweeps, residual {residual:e}");
            return Ok(TypicalTable::from_duals(duals, margins, sweep, trace));
        }
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, duals.clone()));
        }
    }

    let (residual, best) = best.unwrap_or((f64::INFINITY, duals));
    Err(Error::NoConvergence {
        max_iter: opts.max_sweeps,
        residual,
        best: Box::new(TypicalTable::from_duals(best, margins, opts.max_sweeps, trace)),
    })
}

/// `ln rho(R, C) = g(Z)`.
pub fn log_rho(tt: &TypicalTable) -> f64 {
    tt.g_of_z
}

/// Two-sided bound on `ln |Sigma(R, C)|`.
#[derive(Clone, Debug, Serialize)]
pub struct CountBounds {
    /// `g(Z)`.
    pub log_rho: f64,
    /// `G(s, t)` at the solver's duals. `G` is at least its minimum
    /// `ln rho`, so this is an upper bound on `ln |Sigma|` regardless of how
    /// far the solver got.
    pub log_upper: f64,
    /// The lower bound `ln rho - gamma (m + n) ln N` with an unspecified
    /// absolute constant `gamma`.
    pub log_lower: String,
}

pub fn count_bounds(tt: &TypicalTable) -> Result<CountBounds> {
    Ok(CountBounds {
        log_rho: tt.g_of_z,
        log_upper: dual_objective(&tt.duals, &tt.margins)?,
        log_lower: format!(
            "{} - gamma * {} * ln({})",
            tt.g_of_z,
            tt.margins.m() + tt.margins.n(),
            tt.margins.total()
        ),
    })
}

/// Largest deviation of `L_ij = ln((z_ij + 1) / z_ij)` from the best additive
/// fit `lambda_i + mu_j`.
///
/// The least-squares fit of a two-way additive model is
/// `rowmean_i + colmean_j - grandmean`; the split into `lambda`, `mu` is only
/// fixed up to a common shift, pinned here by `lambda_1 = L_11 / 2`.
pub fn check_optimality(z: &RealMatrix) -> f64 {
    optimality_fit(z).2
}

/// `(lambda, mu, max residual)` for [`check_optimality`].
pub fn optimality_fit(z: &RealMatrix) -> (Vec<f64>, Vec<f64>, f64) {
    let (m, n) = z.shape();
    let l: Vec<f64> = z.data().iter().map(|&v| (1.0 / v).ln_1p()).collect();
    let at = |i: usize, j: usize| l[i * n + j];
    let row_mean: Vec<f64> = (0..m).map(|i| (0..n).map(|j| at(i, j)).sum::<f64>() / n as f64).collect();
    let col_mean: Vec<f64> = (0..n).map(|j| (0..m).map(|i| at(i, j)).sum::<f64>() / m as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / m as f64;
    let shift = 0.5 * at(0, 0) - (row_mean[0] - grand);
    let lambda: Vec<f64> = row_mean.iter().map(|r| r - grand + shift).collect();
    let mu: Vec<f64> = col_mean.iter().map(|c| c - shift).collect();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            worst = worst.max((at(i, j) - lambda[i] - mu[j]).abs());
        }
    }
    if l.iter().any(|v| !v.is_finite()) {
        worst = f64::INFINITY;
    }
    (lambda, mu, worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntryLowerBounds {
    /// `r_- c_- / (r_+ m)`.
    pub by_rows: f64,
    /// `c_- r_- / (c_+ n)`.
    pub by_cols: f64,
    /// `delta^3 N / (mn)` with `delta` the smoothness of the margins.
    pub smooth: f64,
}

impl EntryLowerBounds {
    pub fn strongest(&self) -> f64 {
        self.by_rows.max(self.by_cols).max(self.smooth)
    }

    /// Whether every entry of `z` clears all three bounds, allowing a
    /// relative slack `rel` for floating-point error.
    pub fn hold_for(&self, z: &RealMatrix, rel: f64) -> bool {
        z.min() >= self.strongest() * (1.0 - rel)
    }
}

pub fn entry_lower_bounds(margins: &Margins) -> EntryLowerBounds {
    let stats = |v: &[u64]| {
        let min = *v.iter().min().expect("non-empty margins") as f64;
        let max = *v.iter().max().expect("non-empty margins") as f64;
        (min, max)
    };
    let (r_min, r_max) = stats(margins.rows());
    let (c_min, c_max) = stats(margins.cols());
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let delta = smoothness_delta(margins);
    EntryLowerBounds {
        by_rows: r_min * c_min / (r_max * m),
        by_cols: c_min * r_min / (c_max * n),
        smooth: delta.powi(3) * margins.total() as f64 / (m * n),
    }
}

/// Rows containing an entry `z_ij >= alpha N / (mn)` (0-based).
pub fn large_entry_rows(tt: &TypicalTable, alpha: f64) -> Result<Vec<usize>> {
    let margins = &tt.margins;
    let (m, n) = (margins.m(), margins.n());
    let total = margins.total() as f64;
    let min_alpha = 2.0 * (m * n) as f64 / total;
    if !(alpha >= min_alpha) {
        return Err(Error::AlphaTooSmall { alpha, min: min_alpha });
    }
    let threshold = alpha * total / (m * n) as f64;
    Ok((0..m)
        .filter(|&i| (0..n).any(|j| tt.z.get(i, j) >= threshold))
        .collect())
}

/// `4m / (delta alpha)`, the ceiling on the number of rows returned by
/// [`large_entry_rows`].
pub fn large_entry_row_bound(margins: &Margins, alpha: f64) -> f64 {
    4.0 * margins.m() as f64 / (smoothness_delta(margins) * alpha)
}
