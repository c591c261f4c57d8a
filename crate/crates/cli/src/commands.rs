//! The subcommands. Each `*_experiment` function computes results without
//! touching the file system; the `cmd_*` functions run it and write files.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use typical_table::counting::{enumerate_tables, ln_biguint, DpTable};
use typical_table::model::north_west_corner;
use typical_table::rng::aux_stream;
use typical_table::sampling::{concentration_bound, RejectionSampler, Side};
use typical_table::scaling::{auto_t, preimage_bound, ScalingContext};
use typical_table::solver::{
    check_optimality, dual_objective, entry_lower_bounds, large_entry_row_bound, large_entry_rows, EntryLowerBounds,
};
use typical_table::{
    clone_margins, entropy, g_value, independence_table, nu_s, sigma_s, smoothness_delta, solve_typical_with,
    ContingencyTable, EntrySet, Error, Margins, SolverOptions, TypicalTable,
};

use crate::config::{ExperimentConfig, Method, TSpec, SCALE_STREAM};
use crate::error::CliError;
use crate::output::{big_integer, OutputDir};

/// Tables enumerated at most by `scale` before it falls back to sampling.
pub const SCALE_ENUMERATION_CAP: usize = 100_000;
/// Random entry sets checked per source table by `scale`.
pub const SETS_PER_SOURCE: usize = 20;
pub const EPS_SWEEP: [f64; 5] = [0.01, 0.02, 0.05, 0.1, 0.2];

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions {
        tol: cfg.tol,
        max_sweeps: cfg.max_sweeps,
        ..SolverOptions::default()
    }
}

pub fn solve(cfg: &ExperimentConfig, margins: &Margins) -> Result<TypicalTable, CliError> {
    Ok(solve_typical_with(margins, &solver_options(cfg))?)
}

// ---------------------------------------------------------------- typical

#[derive(Clone, Debug, Serialize)]
pub struct LargeEntryCheck {
    pub alpha: f64,
    /// 1-based.
    pub rows: Vec<usize>,
    pub count: usize,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TypicalReport {
    pub m: usize,
    pub n: usize,
    pub total: u64,
    pub converged: bool,
    pub residual: f64,
    pub sweeps: usize,
    pub g_z: f64,
    pub ln_rho: f64,
    /// Dual objective at the returned duals; an upper bound on `ln |Sigma|`.
    pub log_upper: Option<f64>,
    pub delta: f64,
    pub z11: f64,
    pub y11: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub max_abs_z_minus_y: f64,
    pub optimality_residual: f64,
    pub entry_lower_bounds: EntryLowerBounds,
    pub entry_lower_bounds_hold: bool,
    pub large_entry_rows: Vec<LargeEntryCheck>,
}

/// Thresholds at which the large-entry rows are reported: multiples of the
/// smallest admissible `2mn/N`, and `2 m^{1/3} / delta`.
pub fn alpha_grid(margins: &Margins) -> Vec<f64> {
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let min_alpha = 2.0 * m * n / margins.total() as f64;
    let delta = smoothness_delta(margins);
    let mut grid = vec![min_alpha, 2.0 * min_alpha, 4.0 * min_alpha, (2.0 * m.cbrt() / delta).max(min_alpha)];
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub fn typical_report(tt: &TypicalTable, converged: bool) -> Result<TypicalReport, CliError> {
    let margins = &tt.margins;
    let y = independence_table(margins);
    let lower = entry_lower_bounds(margins);
    let large = alpha_grid(margins)
        .into_iter()
        .map(|alpha| {
            let rows = large_entry_rows(tt, alpha)?;
            let bound = large_entry_row_bound(margins, alpha);
            Ok(LargeEntryCheck {
                alpha,
                count: rows.len(),
                holds: rows.len() as f64 <= bound,
                rows: rows.into_iter().map(|i| i + 1).collect(),
                bound,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(TypicalReport {
        m: margins.m(),
        n: margins.n(),
        total: margins.total(),
        converged,
        residual: tt.residual,
        sweeps: tt.sweeps,
        g_z: tt.g_of_z,
        ln_rho: tt.g_of_z,
        log_upper: dual_objective(&tt.duals, margins).ok(),
        delta: smoothness_delta(margins),
        z11: tt.z.get(0, 0),
        y11: y.get(0, 0),
        z_min: tt.z.min(),
        z_max: tt.z.max(),
        max_abs_z_minus_y: tt.z.max_abs_diff(&y)?,
        optimality_residual: check_optimality(&tt.z),
        entry_lower_bounds: lower,
        entry_lower_bounds_hold: lower.hold_for(&tt.z, 1e-9),
        large_entry_rows: large,
    })
}

pub fn cmd_typical(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = OutputDir::create(cfg)?;
    let (tt, failure) = match solve_typical_with(&cfg.margins, &solver_options(cfg)) {
        Ok(tt) => (tt, None),
        Err(Error::NoConvergence { max_iter, residual, best }) => {
            let msg = format!("no convergence after {max_iter} sweeps (residual {residual:e}); best iterate written");
            (*best, Some(CliError::Solver(msg)))
        }
        Err(e) => return Err(e.into()),
    };
    let converged = failure.is_none();
    out.write_json(
        "typical.json",
        &json!({
            "converged": converged,
            "margins": tt.margins,
            "residual": tt.residual,
            "sweeps": tt.sweeps,
            "g_z": tt.g_of_z,
            "z": tt.z,
        }),
    )?;
    out.write_json(
        "duals.json",
        &json!({ "converged": converged, "s": tt.duals.s, "t": tt.duals.t }),
    )?;
    out.write_json("report.json", &typical_report(&tt, converged)?)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------- compare

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub i: usize,
    pub j: usize,
    pub z: f64,
    pub y: f64,
    pub diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CloneRow {
    pub k: u64,
    pub m: usize,
    pub n: usize,
    pub set_size: usize,
    pub sigma_s: f64,
    pub sigma_s_over_k2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareSummary {
    pub entropy_y: f64,
    pub entropy_z: f64,
    pub g_y: f64,
    pub g_z: f64,
    pub max_abs_diff: f64,
    pub equal_row_sums: bool,
    pub equal_col_sums: bool,
    pub set: String,
    pub clones: Vec<CloneRow>,
    /// Largest relative deviation of `sigma_S(Z_k) / k^2` from its value at
    /// the first clone factor.
    pub clone_ratio_max_rel_dev: f64,
}

/// Each position of `s` replaced by its `k x k` block.
pub fn clone_set(s: &EntrySet, k: usize) -> EntrySet {
    EntrySet::new(
        s.iter()
            .flat_map(|(i, j)| (0..k * k).map(move |d| (i * k + d / k, j * k + d % k))),
    )
}

pub fn compare_experiment(cfg: &ExperimentConfig) -> Result<(Vec<CompareRow>, CompareSummary), CliError> {
    let margins = &cfg.margins;
    let tt = solve(cfg, margins)?;
    let y = independence_table(margins);
    let (m, n) = (margins.m(), margins.n());
    let rows = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| CompareRow {
            i: i + 1,
            j: j + 1,
            z: tt.z.get(i, j),
            y: y.get(i, j),
            diff: tt.z.get(i, j) - y.get(i, j),
        })
        .collect();
    let s = cfg.set.resolve(m, n, cfg.seed)?;
    let mut clones = Vec::new();
    for &k in &cfg.clone_k {
        let cloned = clone_margins(margins, k)?;
        let tk = solve(cfg, &cloned)?;
        let sk = clone_set(&s, k as usize);
        let sigma = sigma_s(&tk.z, &sk)?;
        clones.push(CloneRow {
            k,
            m: cloned.m(),
            n: cloned.n(),
            set_size: sk.len(),
            sigma_s: sigma,
            sigma_s_over_k2: sigma / (k * k) as f64,
        });
    }
    let base = clones.first().map_or(0.0, |c| c.sigma_s_over_k2);
    let clone_ratio_max_rel_dev = clones
        .iter()
        .map(|c| (c.sigma_s_over_k2 / base - 1.0).abs())
        .fold(0.0, f64::max);
    let total = margins.total() as f64;
    let all_equal = |v: &[u64]| v.windows(2).all(|w| w[0] == w[1]);
    let summary = CompareSummary {
        entropy_y: entropy(&y, total)?,
        entropy_z: entropy(&tt.z, total)?,
        g_y: g_value(&y),
        g_z: tt.g_of_z,
        max_abs_diff: tt.z.max_abs_diff(&y)?,
        equal_row_sums: all_equal(margins.rows()),
        equal_col_sums: all_equal(margins.cols()),
        set: cfg.set.to_string(),
        clones,
        clone_ratio_max_rel_dev,
    };
    Ok((rows, summary))
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (rows, summary) = compare_experiment(cfg)?;
    let out = OutputDir::create(cfg)?;
    let mut w = out.csv("compare.csv")?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    out.write_json("compare.json", &summary)
}

// ---------------------------------------------------------------- count

#[derive(Clone, Debug)]
pub struct CountResult {
    pub count: BigUint,
    pub ln_count: f64,
    pub ln_rho: f64,
    pub log_upper: f64,
    pub upper_bound_holds: bool,
    pub dp_states: usize,
}

impl CountResult {
    pub fn to_json(&self, budget: usize) -> Value {
        json!({
            "count": big_integer(&self.count.to_string()),
            "ln_count": self.ln_count,
            "ln_rho": self.ln_rho,
            "log_upper": self.log_upper,
            "ratio": self.ln_count / self.ln_rho,
            "upper_bound_holds": self.upper_bound_holds,
            "dp_states": self.dp_states,
            "budget": budget,
        })
    }
}

/// `ln |Sigma| <= ln rho` up to a relative slack of `1e-9`.
pub fn bound_holds(ln_count: f64, ln_rho: f64) -> bool {
    ln_count <= ln_rho + 1e-9 * (1.0 + ln_rho.abs())
}

pub fn count_experiment(cfg: &ExperimentConfig) -> Result<CountResult, CliError> {
    let tt = solve(cfg, &cfg.margins)?;
    let dp = DpTable::build(&cfg.margins, cfg.budget)?;
    let ln_count = ln_biguint(dp.count());
    Ok(CountResult {
        count: dp.count().clone(),
        ln_count,
        ln_rho: tt.g_of_z,
        log_upper: dual_objective(&tt.duals, &cfg.margins)?,
        upper_bound_holds: bound_holds(ln_count, tt.g_of_z),
        dp_states: dp.states(),
    })
}

pub fn cmd_count(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let result = count_experiment(cfg)?;
    OutputDir::create(cfg)?.write_json("count.json", &result.to_json(cfg.budget))
}

// ---------------------------------------------------------------- sample

#[derive(Serialize)]
struct SampleRecord<'a> {
    index: usize,
    table: &'a ContingencyTable,
}

pub fn sample_experiment(cfg: &ExperimentConfig) -> Result<(Vec<ContingencyTable>, Value), CliError> {
    match cfg.method {
        Method::Rejection => {
            let tt = solve(cfg, &cfg.margins)?;
            let (tables, stats) = RejectionSampler::new(&tt).draw_many(cfg.seed, cfg.samples, cfg.max_attempts)?;
            let scale = tt.g_of_z.exp();
            let estimate = scale * stats.rate();
            let estimate_se = scale * stats.stderr();
            let exact = match DpTable::build(&cfg.margins, cfg.budget) {
                Ok(dp) => Some(dp.count().clone()),
                Err(Error::BudgetExceeded { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            let within = exact.as_ref().map(|c| {
                let c = typical_table::counting::ln_biguint(c).exp();
                (estimate - c).abs() <= 4.0 * estimate_se
            });
            let stats = json!({
                "method": "rejection",
                "samples": cfg.samples,
                "attempts": stats.attempts,
                "accepts": stats.accepts,
                "rate": stats.rate(),
                "stderr": stats.stderr(),
                "g_z": tt.g_of_z,
                "count_estimate": estimate,
                "count_estimate_stderr": estimate_se,
                "exact_count": exact.map(|c| big_integer(&c.to_string())),
                "estimate_within_4se": within,
            });
            Ok((tables, stats))
        }
        Method::Dp => {
            let dp = DpTable::build(&cfg.margins, cfg.budget)?;
            let tables = dp.sample_many(cfg.seed, cfg.samples);
            let stats = json!({
                "method": "dp",
                "samples": cfg.samples,
                "dp_states": dp.states(),
                "count": big_integer(&dp.count().to_string()),
            });
            Ok((tables, stats))
        }
    }
}

pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (tables, stats) = sample_experiment(cfg)?;
    let out = OutputDir::create(cfg)?;
    out.write_jsonl(
        "samples.jsonl",
        tables.iter().enumerate().map(|(index, table)| SampleRecord { index, table }),
    )?;
    out.write_json("stats.json", &stats)
}

// ---------------------------------------------------------------- concentrate

#[derive(Clone, Debug, Serialize)]
pub struct DrawRow {
    pub index: usize,
    pub sigma_s: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    /// `sweep` or `smooth` (the value `delta ln n / m^{1/3}`).
    pub kind: &'static str,
    pub inside_fraction: f64,
    pub lower_tail_freq: f64,
    pub upper_tail_freq: f64,
    pub bound_lower: f64,
    pub bound_upper: f64,
    pub lower_within_bound: bool,
    pub upper_within_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcentrateSummary {
    pub m: usize,
    pub n: usize,
    pub total: u64,
    pub set: String,
    pub set_size: usize,
    pub sigma_s_z: f64,
    pub nu_s_z: f64,
    pub delta: f64,
    /// Smallest `alpha >= 1` with `z_ij <= alpha N / (mn)` on the set.
    pub alpha: f64,
    pub smooth_eps: Option<f64>,
    pub draws: usize,
    pub dp_states: usize,
    pub mean_ratio: f64,
    pub quantiles: BTreeMap<String, f64>,
    pub within_0_8_1_2: f64,
    pub lower_tails_within_bounds: bool,
    pub upper_tails_within_bounds: bool,
}

/// Linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn concentrate_experiment(
    cfg: &ExperimentConfig,
) -> Result<(Vec<DrawRow>, Vec<EpsRow>, ConcentrateSummary), CliError> {
    let margins = &cfg.margins;
    let (m, n) = (margins.m(), margins.n());
    let tt = solve(cfg, margins)?;
    let s = cfg.set.resolve(m, n, cfg.seed)?;
    let sigma_z = sigma_s(&tt.z, &s)?;
    let nu_z = nu_s(&tt.z, &s)?;
    let delta = smoothness_delta(margins);
    let unit = margins.total() as f64 / (m * n) as f64;
    let alpha = s.iter().map(|(i, j)| tt.z.get(i, j) / unit).fold(1.0, f64::max);

    let dp = DpTable::build(margins, cfg.budget)?;
    let draws: Vec<DrawRow> = dp
        .sample_many(cfg.seed, cfg.samples)
        .iter()
        .enumerate()
        .map(|(index, d)| {
            let sigma: u64 = s.iter().map(|(i, j)| d.get(i, j)).sum();
            DrawRow {
                index,
                sigma_s: sigma,
                ratio: sigma as f64 / sigma_z,
            }
        })
        .collect();
    let count = draws.len().max(1) as f64;
    let freq = |pred: &dyn Fn(f64) -> bool| draws.iter().filter(|d| pred(d.ratio)).count() as f64 / count;

    let smooth_eps = delta * (n as f64).ln() / (m as f64).cbrt();
    let smooth_eps = (smooth_eps > 0.0 && smooth_eps < 1.0).then_some(smooth_eps);
    let mut eps_list: Vec<(f64, &'static str)> = EPS_SWEEP.iter().map(|&e| (e, "sweep")).collect();
    if let Some(e) = smooth_eps {
        eps_list.push((e, "smooth"));
    }
    let eps_rows = eps_list
        .into_iter()
        .map(|(eps, kind)| {
            let lower = freq(&|r| r <= 1.0 - eps);
            let upper = freq(&|r| r >= 1.0 + eps);
            let bound_lower = concentration_bound(delta, alpha, s.len(), eps, Side::Lower)?;
            let bound_upper = concentration_bound(delta, alpha, s.len(), eps, Side::Upper)?;
            Ok(EpsRow {
                eps,
                kind,
                inside_fraction: freq(&|r| r > 1.0 - eps && r < 1.0 + eps),
                lower_tail_freq: lower,
                upper_tail_freq: upper,
                bound_lower,
                bound_upper,
                lower_within_bound: lower <= bound_lower,
                upper_within_bound: upper <= bound_upper,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut sorted: Vec<f64> = draws.iter().map(|d| d.ratio).collect();
    sorted.sort_by(f64::total_cmp);
    let quantiles = [0.01f64, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99]
        .iter()
        .map(|&p| (format!("q{:02}", (p * 100.0).round() as u32), quantile(&sorted, p)))
        .collect();
    let summary = ConcentrateSummary {
        m,
        n,
        total: margins.total(),
        set: cfg.set.to_string(),
        set_size: s.len(),
        sigma_s_z: sigma_z,
        nu_s_z: nu_z,
        delta,
        alpha,
        smooth_eps,
        draws: draws.len(),
        dp_states: dp.states(),
        mean_ratio: sorted.iter().sum::<f64>() / count,
        quantiles,
        within_0_8_1_2: freq(&|r| (0.8..=1.2).contains(&r)),
        lower_tails_within_bounds: eps_rows.iter().all(|r| r.lower_within_bound),
        upper_tails_within_bounds: eps_rows.iter().all(|r| r.upper_within_bound),
    };
    Ok((draws, eps_rows, summary))
}

pub fn cmd_concentrate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (draws, eps_rows, summary) = concentrate_experiment(cfg)?;
    let out = OutputDir::create(cfg)?;
    let mut w = out.csv("concentrate.csv")?;
    for row in &eps_rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let mut w = out.csv("concentrate_draws.csv")?;
    for row in &draws {
        w.serialize(row)?;
    }
    w.flush()?;
    out.write_json("concentrate.json", &summary)
}

// ---------------------------------------------------------------- scale

#[derive(Clone, Debug, Serialize)]
pub struct PreimageReport {
    pub images: usize,
    pub max: u64,
    pub bound: Value,
    pub total: u64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleReport {
    pub t: u64,
    pub t_auto: bool,
    pub context: ScalingContext,
    pub b_in_range: bool,
    pub scaled_margins_in_range: bool,
    pub sources: usize,
    pub enumerated: bool,
    pub images_have_scaled_margins: bool,
    pub sets_per_source: usize,
    pub sum_bounds_hold: bool,
    pub preimage: Option<PreimageReport>,
    /// For `t = 1`: whether `T(D) = D + 2` entrywise for every source.
    pub unit_t_translation: Option<bool>,
    /// `max |z_ij / (t z'_ij) - 1|` with `Z'` the typical table of the scaled
    /// margins. Informational only.
    pub typical_ratio_max_dev: Option<f64>,
    pub all_checks_pass: bool,
}

pub fn scale_experiment(cfg: &ExperimentConfig) -> Result<ScaleReport, CliError> {
    let margins = &cfg.margins;
    let (t, t_auto) = match cfg.t.unwrap_or(TSpec::Auto) {
        TSpec::Auto => (auto_t(margins), true),
        TSpec::Fixed(t) => (t, false),
    };
    let ctx = ScalingContext::new(margins, t, Some(north_west_corner(margins)))?;
    let (sources, enumerated) = match enumerate_tables(margins, SCALE_ENUMERATION_CAP) {
        Ok(all) => (all, true),
        Err(Error::CapExceeded { .. }) => {
            let dp = DpTable::build(margins, cfg.budget)?;
            (dp.sample_many(cfg.seed, cfg.samples), false)
        }
        Err(e) => return Err(e.into()),
    };
    let (m, n) = (margins.m(), margins.n());
    let mut rng = aux_stream(cfg.seed, SCALE_STREAM);
    let mut margins_ok = true;
    let mut sums_ok = true;
    let mut translation_ok = true;
    let mut images: BTreeMap<ContingencyTable, u64> = BTreeMap::new();
    for d in &sources {
        let td = ctx.apply(d)?;
        margins_ok &= td.has_margins(ctx.scaled_margins());
        translation_ok &= td.entries().iter().zip(d.entries()).all(|(&a, &b)| a == b + 2);
        for _ in 0..SETS_PER_SOURCE {
            let s = EntrySet::random_fraction(m, n, 1.0 - rng.gen::<f64>(), &mut rng)?;
            sums_ok &= ctx.sum_bounds_hold(d, &td, &s)?;
        }
        *images.entry(td).or_insert(0) += 1;
    }
    let preimage = enumerated.then(|| {
        let bound = preimage_bound(&ctx);
        let max = images.values().copied().max().unwrap_or(0);
        PreimageReport {
            images: images.len(),
            max,
            within_bound: BigUint::from(max) <= bound,
            bound: big_integer(&bound.to_string()),
            total: images.values().sum(),
        }
    });
    let typical_ratio_max_dev = match (solve(cfg, margins), solve(cfg, ctx.scaled_margins())) {
        (Ok(z), Ok(zs)) => Some(
            z.z.data()
                .iter()
                .zip(zs.z.data())
                .map(|(&a, &b)| (a / (t as f64 * b) - 1.0).abs())
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    let unit_t_translation = (t == 1).then_some(translation_ok);
    let all_checks_pass = ctx.b_in_range()
        && ctx.scaled_margins_in_range()
        && margins_ok
        && sums_ok
        && preimage.as_ref().is_none_or(|p| p.within_bound)
        && unit_t_translation.unwrap_or(true);
    Ok(ScaleReport {
        t,
        t_auto,
        b_in_range: ctx.b_in_range(),
        scaled_margins_in_range: ctx.scaled_margins_in_range(),
        context: ctx,
        sources: sources.len(),
        enumerated,
        images_have_scaled_margins: margins_ok,
        sets_per_source: SETS_PER_SOURCE,
        sum_bounds_hold: sums_ok,
        preimage,
        unit_t_translation,
        typical_ratio_max_dev,
        all_checks_pass,
    })
}

pub fn cmd_scale(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let report = scale_experiment(cfg)?;
    OutputDir::create(cfg)?.write_json("scale_report.json", &report)
}
