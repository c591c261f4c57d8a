//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs as a plain binary (`harness = false`).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command as Process;
use std::time::Instant;

use clap::Parser;
use rand::Rng;
use typical_table::counting::{enumerate_tables, DpTable, DEFAULT_BUDGET};
use typical_table::model::north_west_corner;
use typical_table::rng::child_stream;
use typical_table::sampling::{
    tail_bound_lower, tail_bound_upper, upper_tail_t_max, verify_constant_mass, GeometricMatrixModel,
    RejectionSampler, DEFAULT_MAX_ATTEMPTS,
};
use typical_table::scaling::{preimage_bound, preimage_counts, ScalingContext};
use typical_table::solver::{check_optimality, entry_lower_bounds, large_entry_row_bound, large_entry_rows};
use typical_table::stats::chi_square_uniform;
use typical_table::{
    nu_s, sigma_s, smoothness_delta, solve_typical, ContingencyTable, EntrySet, Margins, TypicalTable,
};
use tt_cli::commands::{compare_experiment, concentrate_experiment};
use tt_cli::{Cli, ExperimentConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn margins(r: &[u64], c: &[u64]) -> Margins {
    Margins::new(r, c).unwrap()
}

fn solve(m: &Margins) -> TypicalTable {
    solve_typical(m, 1e-10, 100_000).unwrap()
}

/// `(x+1) ln(x+1) - x ln x`, written out directly.
fn g_direct(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (x + 1.0) * (x + 1.0).ln() - x * x.ln()
    }
}

/// Number of tables by trying every cell assignment bounded by the margins.
fn brute_force_count(m: &Margins) -> u64 {
    let (rows, cols) = (m.rows(), m.cols());
    let nn = cols.len();
    let mut cells = vec![0u64; rows.len() * nn];
    fn rec(k: usize, cells: &mut [u64], rows: &[u64], cols: &[u64], nn: usize) -> u64 {
        if k == cells.len() {
            let ok_rows = rows.iter().enumerate().all(|(i, &r)| cells[i * nn..(i + 1) * nn].iter().sum::<u64>() == r);
            let ok_cols = cols
                .iter()
                .enumerate()
                .all(|(j, &c)| (0..rows.len()).map(|i| cells[i * nn + j]).sum::<u64>() == c);
            return (ok_rows && ok_cols) as u64;
        }
        let (i, j) = (k / nn, k % nn);
        let mut total = 0;
        for v in 0..=rows[i].min(cols[j]) {
            cells[k] = v;
            total += rec(k + 1, cells, rows, cols, nn);
        }
        cells[k] = 0;
        total
    }
    rec(0, &mut cells, rows, cols, nn)
}

fn config(args: &[&str]) -> ExperimentConfig {
    let cli = Cli::try_parse_from(std::iter::once("tt").chain(args.iter().copied())).unwrap();
    ExperimentConfig::from_command(&cli.command).unwrap()
}

fn join(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

/// Margins of a random table with entries in `1..=200/n`, so every margin is
/// at most 200 and all margins are comparable in size.
fn solver_suite() -> Vec<Margins> {
    (0..50)
        .map(|k| {
            let mut rng = child_stream(20_240_601, k);
            let m = rng.gen_range(2..=20usize);
            let n = rng.gen_range(m..=40usize);
            let cap = (200 / n as u64).max(1);
            let cells: Vec<u64> = (0..m * n).map(|_| rng.gen_range(1..=cap)).collect();
            let rows: Vec<u64> = (0..m).map(|i| cells[i * n..(i + 1) * n].iter().sum()).collect();
            let cols: Vec<u64> = (0..n).map(|j| (0..m).map(|i| cells[i * n + j]).sum()).collect();
            margins(&rows, &cols)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let suite = solver_suite();
    let start = Instant::now();
    let solved: Vec<TypicalTable> = suite.iter().map(solve).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst_res: f64 = 0.0;
    let mut worst_opt: f64 = 0.0;
    for (m, tt) in suite.iter().zip(&solved) {
        ensure!(m.rows().iter().chain(m.cols()).all(|&v| v <= 200), "margin above 200");
        worst_res = worst_res.max(tt.residual);
        worst_opt = worst_opt.max(check_optimality(&tt.z));
    }
    let min_delta = suite.iter().map(smoothness_delta).fold(1.0, f64::min);
    ensure!(worst_res <= 1e-10, "margin residual {worst_res:e} > 1e-10");
    ensure!(worst_opt <= 1e-6, "optimality residual {worst_opt:e} > 1e-6");
    ensure!(elapsed < 5.0, "took {elapsed:.2} s");
    Ok(format!(
        "50 instances, min delta {min_delta:.3}, max residual {worst_res:.1e}, max optimality {worst_opt:.1e}, {elapsed:.2} s"
    ))
}

fn enumerable_suite() -> Vec<Margins> {
    vec![
        margins(&[1, 1], &[1, 1]),
        margins(&[2, 2], &[2, 2]),
        margins(&[1, 1, 1], &[1, 1, 1]),
        margins(&[2, 1], &[1, 1, 1]),
        margins(&[3, 2, 1], &[2, 2, 2]),
    ]
}

fn criterion_2() -> Outcome {
    let mut worst_spread: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for m in enumerable_suite() {
        let tt = solve(&m);
        let tables = enumerate_tables(&m, 100_000).map_err(|e| e.to_string())?;
        let dev = verify_constant_mass(&tt, &tables).map_err(|e| e.to_string())?;
        worst_spread = worst_spread.max(dev.spread);
        worst_rel = worst_rel.max(dev.max_deviation / tt.g_of_z);
        ensure!(dev.spread <= 1e-10, "{:?}: spread {:e}", m.rows(), dev.spread);
        ensure!(dev.max_deviation <= 1e-8 * tt.g_of_z, "{:?}: deviation {:e}", m.rows(), dev.max_deviation);
    }
    Ok(format!("max spread {worst_spread:.1e}, max relative deviation {worst_rel:.1e}"))
}

fn criterion_3() -> Outcome {
    let mut checked = 0;
    let mut suite = enumerable_suite();
    suite.push(margins(&[3, 1, 2], &[2, 2, 1, 1]));
    suite.push(margins(&[4, 4, 4], &[3, 3, 3, 3]));
    for m in &suite {
        let tt = solve(m);
        let exact = brute_force_count(m);
        let dp = DpTable::build(m, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
        ensure!(dp.count() == &num_bigint::BigUint::from(exact), "DP count disagrees with brute force");
        let ln_count = (exact as f64).ln();
        ensure!(ln_count <= tt.g_of_z + 1e-9, "{:?}: ln count {ln_count} > ln rho {}", m.rows(), tt.g_of_z);
        checked += 1;
    }
    // Closed forms: z = 1/2 everywhere for (1,1)^2, z = 1 for (2,2)^2.
    let rho_11 = (4.0 * g_direct(0.5)).exp();
    let rho_22 = (4.0 * g_direct(1.0)).exp();
    let tt11 = solve(&margins(&[1, 1], &[1, 1]));
    let tt22 = solve(&margins(&[2, 2], &[2, 2]));
    ensure!(((rho_11 - 729.0 / 16.0) / rho_11).abs() < 1e-12, "closed form gives {rho_11}");
    ensure!(((rho_22 - 256.0) / rho_22).abs() < 1e-12, "closed form gives {rho_22}");
    ensure!((tt11.g_of_z - rho_11.ln()).abs() <= 1e-9, "solver ln rho {} for (1,1)^2", tt11.g_of_z);
    ensure!((tt22.g_of_z - rho_22.ln()).abs() <= 1e-9, "solver ln rho {} for (2,2)^2", tt22.g_of_z);
    ensure!((2f64).ln() <= tt11.g_of_z + 1e-9 && (3f64).ln() <= tt22.g_of_z + 1e-9, "named bounds fail");
    Ok(format!("{checked} instances; rho(1,1)^2 = {rho_11:.4} >= 2, rho(2,2)^2 = {rho_22:.1} >= 3"))
}

fn criterion_4() -> Outcome {
    const DRAWS: usize = 100_000;
    let start = Instant::now();
    let mut details = Vec::new();
    for (idx, m) in [margins(&[2, 2], &[2, 2]), margins(&[1, 1, 1], &[1, 1, 1])].iter().enumerate() {
        let support = enumerate_tables(m, 1000).map_err(|e| e.to_string())?;
        let tt = solve(m);
        let (rej, stats) = RejectionSampler::new(&tt)
            .draw_many(100 + idx as u64, DRAWS, DEFAULT_MAX_ATTEMPTS)
            .map_err(|e| e.to_string())?;
        let dp = DpTable::build(m, DEFAULT_BUDGET)
            .map_err(|e| e.to_string())?
            .sample_many(200 + idx as u64, DRAWS);
        let p_rej = chi_square_uniform(&rej, &support).map_err(|e| e.to_string())?.p_value;
        let p_dp = chi_square_uniform(&dp, &support).map_err(|e| e.to_string())?.p_value;
        ensure!(p_rej > 0.001, "{:?}: rejection chi-square p = {p_rej}", m.rows());
        ensure!(p_dp > 0.001, "{:?}: DP chi-square p = {p_dp}", m.rows());
        let expected = support.len() as f64 * (-tt.g_of_z).exp();
        let z = (stats.rate() - expected) / stats.stderr();
        ensure!(z.abs() <= 4.0, "{:?}: rate {} vs {expected} ({z:.2} SE)", m.rows(), stats.rate());
        details.push(format!("{:?} p_rej={p_rej:.3} p_dp={p_dp:.3} rate={:.5} ({z:+.2} SE)", m.rows(), stats.rate()));
    }
    let tt = solve(&margins(&[1, 1], &[1, 1]));
    let (_, stats) = RejectionSampler::new(&tt)
        .draw_many(300, DRAWS, DEFAULT_MAX_ATTEMPTS)
        .map_err(|e| e.to_string())?;
    // |Sigma| = 2 and exp(-g(Z)) = 16/729.
    let expected = 32.0 / 729.0;
    let z = (stats.rate() - expected) / stats.stderr();
    ensure!(z.abs() <= 4.0, "(1,1)^2: rate {} vs {expected} ({z:.2} SE)", stats.rate());
    details.push(format!("(1,1)^2 rate={:.5} vs 32/729 ({z:+.2} SE)", stats.rate()));
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 60.0, "took {elapsed:.1} s");
    Ok(format!("{}; {elapsed:.1} s", details.join("; ")))
}

fn criterion_5() -> Outcome {
    const DRAWS: u64 = 100_000;
    let m = margins(&[10; 5], &[10; 5]);
    let tt = solve(&m);
    let model = GeometricMatrixModel::from_typical(&tt);
    let sets = [("all", EntrySet::all(5, 5)), ("left 5x2", EntrySet::block(0..5, 0..2))];
    let mut cells = 0;
    for (name, s) in &sets {
        let sigma_z = sigma_s(&tt.z, s).unwrap();
        let nu_z = nu_s(&tt.z, s).unwrap();
        let z_max = s.iter().map(|(i, j)| tt.z.get(i, j)).fold(0.0, f64::max);
        let sums: Vec<f64> = (0..DRAWS)
            .map(|k| {
                let x = model.sample(&mut child_stream(500, k));
                s.iter().map(|(i, j)| x.get(i, j) as f64).sum()
            })
            .collect();
        let var_target = sigma_z + nu_z;
        let sd = var_target.sqrt();
        for a_mult in [0.5, 1.0, 1.5, 2.0, 3.0] {
            let a = a_mult * sd;
            let low = sums.iter().filter(|&&v| v <= sigma_z - a).count() as f64 / DRAWS as f64;
            let high = sums.iter().filter(|&&v| v >= sigma_z + a).count() as f64 / DRAWS as f64;
            for t_frac in [0.05, 0.1, 0.2, 0.5, 1.0] {
                let bl = tail_bound_lower(sigma_z, nu_z, a, 2.0 * t_frac).map_err(|e| e.to_string())?;
                let tu = upper_tail_t_max(z_max) * t_frac;
                let bu = tail_bound_upper(sigma_z, nu_z, a, tu, z_max).map_err(|e| e.to_string())?;
                ensure!(low <= bl, "{name}: lower tail {low} > {bl} at a={a:.2}, t={}", 2.0 * t_frac);
                ensure!(high <= bu, "{name}: upper tail {high} > {bu} at a={a:.2}, t={tu}");
                cells += 2;
            }
        }
        let n = DRAWS as f64;
        let mean = sums.iter().sum::<f64>() / n;
        let var = sums.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m4 = sums.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let se = ((m4 - var * var) / n).sqrt();
        let dev = (var - var_target) / se;
        ensure!(dev.abs() <= 5.0, "{name}: variance {var} vs {var_target} ({dev:.2} SE)");
    }
    Ok(format!("{cells} tail checks on 2 sets, variances within 5 SE"))
}

fn criterion_6() -> Outcome {
    let rows = join(&[40; 5]);
    let cols = join(&[5; 40]);
    let start = Instant::now();
    let cfg = config(&["concentrate", "--rows", &rows, "--cols", &cols, "--samples", "1000", "--seed", "6"]);
    let (_, eps_rows, s) = concentrate_experiment(&cfg).map_err(|e| e.to_string())?;
    ensure!((s.mean_ratio - 1.0).abs() <= 0.05, "mean ratio {}", s.mean_ratio);
    ensure!(s.within_0_8_1_2 >= 0.95, "only {} within [0.8, 1.2]", s.within_0_8_1_2);
    ensure!(s.lower_tails_within_bounds, "lower tails exceed bounds: {eps_rows:?}");
    // The left half collects whole columns, so its sum is pinned; a random
    // half of the entries exercises the same checks non-trivially.
    let cfg = config(&[
        "concentrate", "--rows", &rows, "--cols", &cols, "--samples", "1000", "--seed", "6", "--set", "fraction:0.5",
    ]);
    let (_, eps_rows, r) = concentrate_experiment(&cfg).map_err(|e| e.to_string())?;
    ensure!((r.mean_ratio - 1.0).abs() <= 0.05, "random half: mean ratio {}", r.mean_ratio);
    ensure!(r.within_0_8_1_2 >= 0.95, "random half: only {} within [0.8, 1.2]", r.within_0_8_1_2);
    ensure!(r.lower_tails_within_bounds, "random half: lower tails exceed bounds: {eps_rows:?}");
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 120.0, "took {elapsed:.1} s");
    Ok(format!(
        "left half: mean {:.4}, inside {:.3}; random half: mean {:.4}, inside {:.3}; {elapsed:.1} s",
        s.mean_ratio, s.within_0_8_1_2, r.mean_ratio, r.within_0_8_1_2
    ))
}

fn criterion_7() -> Outcome {
    let mut details = Vec::new();
    for n in [10usize, 20, 40] {
        let mut r = vec![n as u64; n];
        r[0] = 3 * n as u64;
        let m = margins(&r, &r);
        let tt = solve(&m);
        let nf = n as f64;
        let y11 = 9.0 * nf * nf / (nf * nf + 2.0 * nf);
        let y11_table = typical_table::independence_table(&m).get(0, 0);
        ensure!((y11 - y11_table).abs() <= 1e-12 * y11, "y11 {y11_table} vs closed form {y11}");
        ensure!(y11 <= 9.0, "y11 = {y11}");
        let z11 = tt.z.get(0, 0);
        ensure!(z11 > 0.58 * nf, "n={n}: z11 = {z11}");
        details.push(format!("n={n}: z11/n={:.3}", z11 / nf));
    }
    let cfg = config(&["compare", "--rows", "3,7", "--cols", "2,3,5", "--clone-k", "1,2,3"]);
    let (_, summary) = compare_experiment(&cfg).map_err(|e| e.to_string())?;
    ensure!(summary.clones.len() == 3, "expected three clone factors");
    ensure!(summary.clone_ratio_max_rel_dev <= 1e-6, "sigma/k^2 varies by {:e}", summary.clone_ratio_max_rel_dev);
    let z11 = summary.clones[0].sigma_s_over_k2;
    let y11 = 3.0 * 2.0 / 10.0;
    ensure!((z11 - y11).abs() > 1e-3, "z11 = y11 makes the clone check vacuous");
    details.push(format!("clones: max rel dev {:.1e}", summary.clone_ratio_max_rel_dev));
    Ok(details.join("; "))
}

/// Whether `y` satisfies the defining property of `T(D)`: all partial sums
/// of `D - D_0 + t D_1 - t y` over top-left corners (short of the last row
/// and column) lie in `[0, t)`.
fn is_rounding(d: &ContingencyTable, d0: &ContingencyTable, d1: &ContingencyTable, y: &ContingencyTable, t: i64) -> bool {
    let (m, n) = d.shape();
    let v = |i: usize, j: usize| {
        d.get(i, j) as i64 - d0.get(i, j) as i64 + t * d1.get(i, j) as i64 - t * y.get(i, j) as i64
    };
    (0..m - 1).all(|a| {
        (0..n - 1).all(|b| {
            let p: i64 = (0..=a).flat_map(|i| (0..=b).map(move |j| (i, j))).map(|(i, j)| v(i, j)).sum();
            (0..t).contains(&p)
        })
    })
}

fn criterion_8() -> Outcome {
    let mut checks = 0;
    for m in [margins(&[1, 1], &[1, 1]), margins(&[2, 2], &[2, 2])] {
        let tables = enumerate_tables(&m, 1000).map_err(|e| e.to_string())?;
        for t in 1..=3u64 {
            let ctx = ScalingContext::new(&m, t, Some(north_west_corner(&m))).map_err(|e| e.to_string())?;
            ensure!(ctx.b_in_range(), "t={t}: B outside [2, 3)");
            ensure!(ctx.scaled_margins_in_range(), "t={t}: scaled margins outside range");
            let targets = enumerate_tables(ctx.scaled_margins(), 100_000).map_err(|e| e.to_string())?;
            let images: Vec<ContingencyTable> = tables.iter().map(|d| ctx.apply(d).unwrap()).collect();
            for (d, td) in tables.iter().zip(&images) {
                ensure!(td.has_margins(ctx.scaled_margins()), "T(D) has wrong margins");
                let matches: Vec<&ContingencyTable> = targets
                    .iter()
                    .filter(|y| is_rounding(d, ctx.d0(), ctx.d1(), y, t as i64))
                    .collect();
                ensure!(matches == vec![td], "t={t}: rounding oracle disagrees for {:?}", d.to_rows());
            }
            let mut rng = child_stream(800, t);
            for _ in 0..20 {
                let s = EntrySet::random_fraction(2, 2, 1.0 - rng.gen::<f64>(), &mut rng).unwrap();
                for (d, td) in tables.iter().zip(&images) {
                    ensure!(ctx.sum_bounds_hold(d, td, &s).unwrap(), "sum bounds fail");
                    checks += 1;
                }
            }
            let counts = preimage_counts(&ctx, 1000).map_err(|e| e.to_string())?;
            let bound = preimage_bound(&ctx);
            ensure!(
                counts.values().all(|&c| num_bigint::BigUint::from(c) <= bound),
                "t={t}: preimage count above {bound}"
            );
            ensure!(counts.values().sum::<u64>() == tables.len() as u64, "preimages do not partition");
        }
    }
    Ok(format!("6 instances, {checks} set checks, rounding matches the brute-force oracle"))
}

fn criterion_9() -> Outcome {
    let mut alphas = 0;
    for m in solver_suite() {
        let tt = solve(&m);
        let lower = entry_lower_bounds(&m);
        let (mm, nn) = (m.m() as f64, m.n() as f64);
        let total = m.total() as f64;
        let (r_min, r_max) = (*m.rows().iter().min().unwrap() as f64, *m.rows().iter().max().unwrap() as f64);
        let (c_min, c_max) = (*m.cols().iter().min().unwrap() as f64, *m.cols().iter().max().unwrap() as f64);
        let delta = smoothness_delta(&m);
        let bounds = [r_min * c_min / (r_max * mm), c_min * r_min / (c_max * nn), delta.powi(3) * total / (mm * nn)];
        ensure!(
            (lower.by_rows - bounds[0]).abs() <= 1e-12 * bounds[0] && (lower.smooth - bounds[2]).abs() <= 1e-12 * bounds[2],
            "bound formulas disagree"
        );
        let z_min = tt.z.min();
        for b in bounds {
            ensure!(z_min >= b * (1.0 - 1e-9), "z_min {z_min} below {b}");
        }
        let min_alpha = 2.0 * mm * nn / total;
        for alpha in [min_alpha, 1.5 * min_alpha, 3.0 * min_alpha, (2.0 * mm.cbrt() / delta).max(min_alpha)] {
            let threshold = alpha * total / (mm * nn);
            let rows: Vec<usize> = (0..m.m()).filter(|&i| (0..m.n()).any(|j| tt.z.get(i, j) >= threshold)).collect();
            ensure!(rows == large_entry_rows(&tt, alpha).unwrap(), "large-entry rows disagree");
            let bound = 4.0 * mm / (delta * alpha);
            ensure!((large_entry_row_bound(&m, alpha) - bound).abs() <= 1e-12 * bound, "row bound formula");
            ensure!(rows.len() as f64 <= bound, "|I| = {} > {bound}", rows.len());
            alphas += 1;
        }
    }
    Ok(format!("50 instances, 3 entry bounds each, {alphas} large-entry checks"))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_tt");
    let runs: Vec<Vec<&str>> = vec![
        vec!["typical", "--rows", "3,7", "--cols", "2,3,5"],
        vec!["compare", "--rows", "3,7", "--cols", "2,3,5"],
        vec!["count", "--rows", "2,2", "--cols", "2,2"],
        vec!["sample", "--rows", "1,1,1", "--cols", "1,1,1", "--samples", "300", "--seed", "4"],
        vec!["sample", "--rows", "2,2", "--cols", "2,2", "--samples", "300", "--method", "dp", "--seed", "4"],
        vec!["concentrate", "--rows", "4,4,4", "--cols", "3,3,3,3", "--samples", "300", "--set", "fraction:0.5"],
        vec!["scale", "--rows", "2,2", "--cols", "2,2", "--t", "2"],
    ];
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (k, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = root.path().join(format!("{k}-{rep}"));
            let status = Process::new(bin)
                .args(args)
                .arg("--out")
                .arg(&dir)
                .status()
                .map_err(|e| e.to_string())?;
            ensure!(status.success(), "{args:?} exited with {status}");
            outputs.push(read_dir_sorted(&dir));
        }
        ensure!(!outputs[0].is_empty(), "{args:?} wrote nothing");
        ensure!(outputs[0] == outputs[1], "{args:?}: reruns differ");
        files += outputs[0].len();
    }
    Ok(format!("{} subcommand runs, {files} files identical across reruns", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("solver correctness", criterion_1),
        ("constant mass on the fibre", criterion_2),
        ("count upper bound", criterion_3),
        ("sampler uniformity", criterion_4),
        ("tail-bound domination", criterion_5),
        ("concentration", criterion_6),
        ("large corner and cloned margins", criterion_7),
        ("scaling map", criterion_8),
        ("structural bounds", criterion_9),
        ("reproducibility", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}): {detail} [{secs:.1} s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}): {why} [{secs:.1} s]", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
