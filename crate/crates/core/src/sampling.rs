//! Matrices of independent geometric variables and the rejection sampler
//! built on them.
//!
//! When the means are the typical table `Z`, the probability of every table
//! in `Sigma(R, C)` is the same number `exp(-g(Z))`, so a geometric matrix
//! conditioned on having margins `(R, C)` is uniform on `Sigma(R, C)`.
//!
//! Also provides the Laplace-transform tail bounds for `sigma_S(X)`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ContingencyTable, Margins, RealMatrix};
use crate::rng::child_stream;
use crate::solver::{ln_one_minus_exp_neg, TypicalTable};

pub const DEFAULT_MAX_ATTEMPTS: u64 = 100_000_000;
const PROGRESS_EVERY: u64 = 1_000_000;

/// Independent geometric entries `Pr{x_ij = k} = p_ij q_ij^k` with mean
/// `z_ij = q_ij / p_ij`.
#[derive(Clone, Debug)]
pub struct GeometricMatrixModel {
    z: RealMatrix,
    log_q: Vec<f64>,
    log_p: Vec<f64>,
}

impl GeometricMatrixModel {
    /// `p = 1 / (1 + z)`, `q = z / (1 + z)`; zero means give the point mass
    /// at zero.
    pub fn from_means(z: &RealMatrix) -> Self {
        let log_q = z
            .data()
            .iter()
            .map(|&v| if v == 0.0 { f64::NEG_INFINITY } else { -(1.0 / v).ln_1p() })
            .collect();
        let log_p = z.data().iter().map(|&v| -v.ln_1p()).collect();
        GeometricMatrixModel {
            z: z.clone(),
            log_q,
            log_p,
        }
    }

    /// Builds the model from the duals: `ln q_ij = -(s_i + t_j)` and
    /// `ln p_ij = ln(1 - exp(-(s_i + t_j)))`. This is the same model as
    /// `from_means(&tt.z)`, but `ln q` is exactly additive in `(i, j)`.
    pub fn from_typical(tt: &TypicalTable) -> Self {
        let (s, t) = (&tt.duals.s, &tt.duals.t);
        let x: Vec<f64> = s.iter().flat_map(|&a| t.iter().map(move |&b| a + b)).collect();
        GeometricMatrixModel {
            z: tt.z.clone(),
            log_q: x.iter().map(|&v| -v).collect(),
            log_p: x.iter().map(|&v| ln_one_minus_exp_neg(v)).collect(),
        }
    }

    pub fn means(&self) -> &RealMatrix {
        &self.z
    }

    pub fn shape(&self) -> (usize, usize) {
        self.z.shape()
    }

    fn draw_entry<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> u64 {
        geometric(self.log_q[k], rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ContingencyTable {
        let (m, n) = self.shape();
        let entries = (0..m * n).map(|k| self.draw_entry(k, rng)).collect();
        ContingencyTable::new(m, n, entries).expect("shape taken from the model")
    }

    /// `sum_ij (ln p_ij + d_ij ln q_ij)`.
    pub fn log_mass(&self, d: &ContingencyTable) -> Result<f64> {
        if d.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: d.shape(),
            });
        }
        Ok(d.entries()
            .iter()
            .zip(self.log_p.iter().zip(&self.log_q))
            .map(|(&k, (&lp, &lq))| if k == 0 { lp } else { lp + k as f64 * lq })
            .sum())
    }
}

/// Inverse-transform draw: `floor(ln u / ln q)` with `u` uniform on `(0, 1]`.
fn geometric<R: Rng + ?Sized>(log_q: f64, rng: &mut R) -> u64 {
    if log_q == f64::NEG_INFINITY {
        return 0;
    }
    let u = 1.0 - rng.gen::<f64>();
    (u.ln() / log_q).floor() as u64
}

pub fn geometric_matrix_sample<R: Rng + ?Sized>(model: &GeometricMatrixModel, rng: &mut R) -> ContingencyTable {
    model.sample(rng)
}

pub fn log_mass(model: &GeometricMatrixModel, d: &ContingencyTable) -> Result<f64> {
    model.log_mass(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassDeviation {
    /// `max |ln Pr{X = D} + g(Z)|` over the supplied tables.
    pub max_deviation: f64,
    /// `max ln Pr{X = D} - min ln Pr{X = D}`.
    pub spread: f64,
}

/// Checks that the geometric model with mean `Z` assigns every supplied table
/// the mass `exp(-g(Z))`.
pub fn verify_constant_mass(tt: &TypicalTable, tables: &[ContingencyTable]) -> Result<MassDeviation> {
    let model = GeometricMatrixModel::from_typical(tt);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for table in tables {
        table.check_margins(&tt.margins)?;
        let lm = model.log_mass(table)?;
        lo = lo.min(lm);
        hi = hi.max(lm);
        worst = worst.max((lm + tt.g_of_z).abs());
    }
    Ok(MassDeviation {
        max_deviation: worst,
        spread: if tables.is_empty() { 0.0 } else { hi - lo },
    })
}

/// Acceptance counts of the rejection sampler; merges by addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct AcceptanceStats {
    pub attempts: u64,
    pub accepts: u64,
}

impl AcceptanceStats {
    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepts as f64 / self.attempts as f64
        }
    }

    /// Binomial standard error of [`Self::rate`].
    pub fn stderr(&self) -> f64 {
        if self.attempts == 0 {
            return 0.0;
        }
        let p = self.rate();
        (p * (1.0 - p) / self.attempts as f64).sqrt()
    }

    pub fn merge(self, other: AcceptanceStats) -> AcceptanceStats {
        AcceptanceStats {
            attempts: self.attempts + other.attempts,
            accepts: self.accepts + other.accepts,
        }
    }
}

/// Draws geometric matrices with mean `Z` until one has margins `(R, C)`.
///
/// Entries are generated row by row and an attempt is abandoned as soon as a
/// partial row or column sum overshoots its margin, or a finished row falls
/// short. Once every row matches and no column overshoots, the columns match
/// too since both sides total `N`.
#[derive(Clone, Debug)]
pub struct RejectionSampler {
    model: GeometricMatrixModel,
    margins: Margins,
}

impl RejectionSampler {
    pub fn new(tt: &TypicalTable) -> Self {
        RejectionSampler {
            model: GeometricMatrixModel::from_typical(tt),
            margins: tt.margins.clone(),
        }
    }

    pub fn model(&self) -> &GeometricMatrixModel {
        &self.model
    }

    fn attempt<R: Rng + ?Sized>(&self, rng: &mut R, cells: &mut [u64], col_sums: &mut [u64]) -> bool {
        let (rows, cols) = (self.margins.rows(), self.margins.cols());
        let n = cols.len();
        col_sums.iter_mut().for_each(|c| *c = 0);
        for (i, &r) in rows.iter().enumerate() {
            let mut row_sum = 0u64;
            for j in 0..n {
                let v = self.model.draw_entry(i * n + j, rng);
                row_sum += v;
                col_sums[j] += v;
                if row_sum > r || col_sums[j] > cols[j] {
                    return false;
                }
                cells[i * n + j] = v;
            }
            if row_sum != r {
                return false;
            }
        }
        true
    }

    /// Returns the accepted table and the number of attempts it took.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, max_attempts: u64) -> Result<(ContingencyTable, u64)> {
        let (m, n) = self.model.shape();
        let mut cells = vec![0u64; m * n];
        let mut col_sums = vec![0u64; n];
        for attempt in 1..=max_attempts {
            if self.attempt(rng, &mut cells, &mut col_sums) {
                let table = ContingencyTable::new(m, n, cells).expect("shape taken from the model");
                return Ok((table, attempt));
            }
            if attempt % PROGRESS_EVERY == 0 {
                log::info!("rejection sampler: {attempt} attempts without acceptance");
            }
        }
        Err(Error::AttemptsExhausted(max_attempts))
    }

    /// `count` accepted tables, table `k` drawn from child stream `k` of
    /// `seed`. The statistics do not depend on the thread count.
    pub fn draw_many(&self, seed: u64, count: usize, max_attempts: u64) -> Result<(Vec<ContingencyTable>, AcceptanceStats)> {
        let draws: Vec<(ContingencyTable, u64)> = (0..count)
            .into_par_iter()
            .map(|k| self.draw(&mut child_stream(seed, k as u64), max_attempts))
            .collect::<Result<_>>()?;
        let stats = draws.iter().fold(AcceptanceStats::default(), |acc, (_, a)| {
            acc.merge(AcceptanceStats {
                attempts: *a,
                accepts: 1,
            })
        });
        Ok((draws.into_iter().map(|(t, _)| t).collect(), stats))
    }
}

pub fn rejection_uniform_sample<R: Rng + ?Sized>(
    tt: &TypicalTable,
    rng: &mut R,
    max_attempts: u64,
) -> Result<(ContingencyTable, u64)> {
    RejectionSampler::new(tt).draw(rng, max_attempts)
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainViolation(format!("{name} must be a non-negative number, got {v}")))
    }
}

/// Bound on `Pr{sigma_S(X) <= sigma_S(Z) - a}`:
/// `exp(-t a + t^2 (sigma + nu) / 2)` for `0 < t <= 2`.
pub fn tail_bound_lower(sigma_z: f64, nu_z: f64, a: f64, t: f64) -> Result<f64> {
    check_nonnegative("sigma_S(Z)", sigma_z)?;
    check_nonnegative("nu_S(Z)", nu_z)?;
    if !(t > 0.0 && t <= 2.0) {
        return Err(Error::DomainViolation(format!("lower-tail t must lie in (0, 2], got {t}")));
    }
    Ok((-t * a + 0.5 * t * t * (sigma_z + nu_z)).exp())
}

/// Bound on `Pr{sigma_S(X) >= sigma_S(Z) + a}`:
/// `exp(-t a + 2 t^2 (sigma + nu))` for `0 < t <= min(1/3, 1/(2 z_max))`.
pub fn tail_bound_upper(sigma_z: f64, nu_z: f64, a: f64, t: f64, z_max_on_s: f64) -> Result<f64> {
    check_nonnegative("sigma_S(Z)", sigma_z)?;
    check_nonnegative("nu_S(Z)", nu_z)?;
    check_nonnegative("max z on S", z_max_on_s)?;
    let t_max = upper_tail_t_max(z_max_on_s);
    if !(t > 0.0 && t <= t_max) {
        return Err(Error::DomainViolation(format!("upper-tail t must lie in (0, {t_max}], got {t}")));
    }
    Ok((-t * a + 2.0 * t * t * (sigma_z + nu_z)).exp())
}

/// `min(1/3, 1/(2 z_max))`.
pub fn upper_tail_t_max(z_max_on_s: f64) -> f64 {
    if z_max_on_s > 0.0 {
        (1.0 / 3.0f64).min(0.5 / z_max_on_s)
    } else {
        1.0 / 3.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// Bound on `Pr{sigma_S(X) <= (1 - eps) sigma_S(Z)}` (lower side) or
/// `Pr{sigma_S(X) >= (1 + eps) sigma_S(Z)}` (upper side) for delta-smooth
/// margins with `z_ij <= alpha N / (mn)` on `S`:
/// `exp(-eps^2 delta^4 |S| / (k + k delta alpha))`, `k = 2` or `8`.
pub fn concentration_bound(delta: f64, alpha: f64, s_size: usize, eps: f64, side: Side) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::DomainViolation(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(alpha >= 1.0) {
        return Err(Error::DomainViolation(format!("alpha must be at least 1, got {alpha}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::DomainViolation(format!("delta must lie in (0, 1], got {delta}")));
    }
    let k = match side {
        Side::Lower => 2.0,
        Side::Upper => 8.0,
    };
    Ok((-eps * eps * delta.powi(4) * s_size as f64 / (k + k * delta * alpha)).exp())
}
