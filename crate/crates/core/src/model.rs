//! Margins, tables, real matrices and entry sets, together with the
//! closed-form quantities defined on them: the concave function `g`,
//! entry-set sums, the independence table, entropy, cloned margins and the
//! Fisher-Yates mass.
//!
//! All external representations use 1-based indices; internally every index
//! is 0-based.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Row sums `R`, column sums `C` and their common total `N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MarginsRepr", into = "MarginsRepr")]
pub struct Margins {
    rows: Vec<u64>,
    cols: Vec<u64>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct MarginsRepr {
    rows: Vec<i64>,
    cols: Vec<i64>,
}

impl TryFrom<MarginsRepr> for Margins {
    type Error = Error;

    fn try_from(repr: MarginsRepr) -> Result<Self> {
        validate_margins(&repr.rows, &repr.cols)
    }
}

impl From<Margins> for MarginsRepr {
    fn from(m: Margins) -> Self {
        MarginsRepr {
            rows: m.rows.iter().map(|&r| r as i64).collect(),
            cols: m.cols.iter().map(|&c| c as i64).collect(),
        }
    }
}

/// Checks that both vectors are non-empty, strictly positive and share a
/// total.
pub fn validate_margins(rows: &[i64], cols: &[i64]) -> Result<Margins> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::EmptyMargins);
    }
    let positive = |axis: &'static str, v: &[i64]| -> Result<Vec<u64>> {
        v.iter()
            .enumerate()
            .map(|(index, &value)| {
                if value < 1 {
                    Err(Error::NonPositiveEntry { axis, index, value })
                } else {
                    Ok(value as u64)
                }
            })
            .collect()
    };
    let rows = positive("row", rows)?;
    let cols = positive("column", cols)?;
    let row_total: u64 = rows.iter().sum();
    let col_total: u64 = cols.iter().sum();
    if row_total != col_total {
        return Err(Error::MismatchedTotals {
            rows: row_total,
            cols: col_total,
        });
    }
    Ok(Margins {
        rows,
        cols,
        total: row_total,
    })
}

impl Margins {
    pub fn new(rows: &[u64], cols: &[u64]) -> Result<Self> {
        let to_signed = |v: &[u64]| v.iter().map(|&x| x as i64).collect::<Vec<_>>();
        validate_margins(&to_signed(rows), &to_signed(cols))
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn cols(&self) -> &[u64] {
        &self.cols
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of rows `m`.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Number of columns `n`.
    pub fn n(&self) -> usize {
        self.cols.len()
    }

    pub fn transpose(&self) -> Margins {
        Margins {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            total: self.total,
        }
    }
}

/// Read access shared by integer tables and real matrices.
pub trait Entries {
    fn shape(&self) -> (usize, usize);
    fn value(&self, i: usize, j: usize) -> f64;
}

/// A non-negative integer matrix, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u64>>", into = "Vec<Vec<u64>>")]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    entries: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(rows: usize, cols: usize, entries: Vec<u64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} entries do not form a non-empty {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(ContingencyTable {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ContingencyTable {
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("ragged table rows".into()));
        }
        Self::new(m, n, rows.into_iter().flatten().collect())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.entries.chunks(self.cols).map(<[u64]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.entries.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0; self.cols];
        for row in self.entries.chunks(self.cols) {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn has_margins(&self, margins: &Margins) -> bool {
        self.shape() == (margins.m(), margins.n())
            && self.row_sums() == margins.rows()
            && self.col_sums() == margins.cols()
    }

    pub fn check_margins(&self, margins: &Margins) -> Result<()> {
        if self.shape() != (margins.m(), margins.n()) {
            return Err(Error::MarginMismatch(format!(
                "table is {:?}, margins are {}x{}",
                self.shape(),
                margins.m(),
                margins.n()
            )));
        }
        if !self.has_margins(margins) {
            return Err(Error::MarginMismatch(format!(
                "row sums {:?}, column sums {:?}",
                self.row_sums(),
                self.col_sums()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<u64>>> for ContingencyTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u64>>) -> Result<Self> {
        ContingencyTable::from_rows(rows)
    }
}

impl From<ContingencyTable> for Vec<Vec<u64>> {
    fn from(t: ContingencyTable) -> Self {
        t.to_rows()
    }
}

impl Entries for ContingencyTable {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) as f64
    }
}

/// A non-negative real matrix with finite entries, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form a non-empty {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NegativeEntry {
                row: k / cols,
                col: k % cols,
                value: data[k],
            });
        }
        Ok(RealMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self::new(rows, cols, data)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        Self::new(m, n, rows.into_iter().flatten().collect())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols) {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn max_abs_diff(&self, other: &RealMatrix) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for RealMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        RealMatrix::from_rows(rows)
    }
}

impl From<RealMatrix> for Vec<Vec<f64>> {
    fn from(m: RealMatrix) -> Self {
        m.to_rows()
    }
}

impl Entries for RealMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// A deduplicated set of matrix positions. Serialized as an array of 1-based
/// `[i, j]` pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[usize; 2]>", into = "Vec<[usize; 2]>")]
pub struct EntrySet {
    indices: BTreeSet<(usize, usize)>,
}

impl EntrySet {
    /// Builds a set from 0-based positions.
    pub fn new(indices: impl IntoIterator<Item = (usize, usize)>) -> Self {
        EntrySet {
            indices: indices.into_iter().collect(),
        }
    }

    pub fn from_one_based(pairs: &[[usize; 2]]) -> Result<Self> {
        if let Some(p) = pairs.iter().find(|p| p[0] == 0 || p[1] == 0) {
            return Err(Error::InvalidArgument(format!(
                "entry-set indices are 1-based, got [{}, {}]",
                p[0], p[1]
            )));
        }
        Ok(Self::new(pairs.iter().map(|p| (p[0] - 1, p[1] - 1))))
    }

    pub fn all(m: usize, n: usize) -> Self {
        Self::new((0..m).flat_map(|i| (0..n).map(move |j| (i, j))))
    }

    /// The block of rows `rows` and columns `cols` (0-based, half-open).
    pub fn block(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        Self::new(rows.flat_map(|i| cols.clone().map(move |j| (i, j))))
    }

    /// A uniformly random set of `ceil(fraction * m * n)` positions.
    pub fn random_fraction<R: Rng + ?Sized>(
        m: usize,
        n: usize,
        fraction: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::DomainViolation(format!(
                "entry fraction must lie in (0, 1], got {fraction}"
            )));
        }
        let size = ((fraction * (m * n) as f64).ceil() as usize).min(m * n);
        Ok(Self::new(
            sample(rng, m * n, size).into_iter().map(|k| (k / n, k % n)),
        ))
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.iter().copied()
    }

    pub fn check_bounds(&self, rows: usize, cols: usize) -> Result<()> {
        match self.iter().find(|&(i, j)| i >= rows || j >= cols) {
            Some((row, col)) => Err(Error::IndexOutOfBounds {
                row: row + 1,
                col: col + 1,
                rows,
                cols,
            }),
            None => Ok(()),
        }
    }
}

impl TryFrom<Vec<[usize; 2]>> for EntrySet {
    type Error = Error;

    fn try_from(pairs: Vec<[usize; 2]>) -> Result<Self> {
        EntrySet::from_one_based(&pairs)
    }
}

impl From<EntrySet> for Vec<[usize; 2]> {
    fn from(s: EntrySet) -> Self {
        s.iter().map(|(i, j)| [i + 1, j + 1]).collect()
    }
}

/// `g(x) = (x+1) ln(x+1) - x ln x`, with `g(0) = 0`.
pub fn g(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.ln_1p() + x * (1.0 / x).ln_1p()
    }
}

/// `g(X) = sum of g(x_ij)`.
pub fn g_value(x: &RealMatrix) -> f64 {
    x.data().iter().map(|&v| g(v)).sum()
}

/// Sum of the entries of `a` over `s`.
pub fn sigma_s<A: Entries + ?Sized>(a: &A, s: &EntrySet) -> Result<f64> {
    let (m, n) = a.shape();
    s.check_bounds(m, n)?;
    Ok(s.iter().map(|(i, j)| a.value(i, j)).sum())
}

/// Sum of the squared entries of `a` over `s`.
pub fn nu_s<A: Entries + ?Sized>(a: &A, s: &EntrySet) -> Result<f64> {
    let (m, n) = a.shape();
    s.check_bounds(m, n)?;
    Ok(s.iter().map(|(i, j)| a.value(i, j).powi(2)).sum())
}

/// The largest `delta <= 1` for which the margins are delta-smooth.
pub fn smoothness_delta(margins: &Margins) -> f64 {
    let total = margins.total() as f64;
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let two_sided = |v: f64, dim: f64| {
        let ratio = v * dim / total;
        ratio.min(1.0 / ratio)
    };
    let rows = margins.rows().iter().map(|&r| two_sided(r as f64, m));
    let cols = margins.cols().iter().map(|&c| two_sided(c as f64, n));
    rows.chain(cols)
        .fold((total / (m * n)).min(1.0), f64::min)
}

/// The independence table `y_ij = r_i c_j / N`.
pub fn independence_table(margins: &Margins) -> RealMatrix {
    let total = margins.total() as f64;
    let (rows, cols) = (margins.rows(), margins.cols());
    RealMatrix::from_fn(margins.m(), margins.n(), |i, j| {
        rows[i] as f64 * cols[j] as f64 / total
    })
    .expect("products of positive margins are finite and positive")
}

/// `H(X) = sum (x_ij / N) ln(N / x_ij)`; zero entries contribute nothing.
pub fn entropy(x: &RealMatrix, total: f64) -> Result<f64> {
    if !(total > 0.0) {
        return Err(Error::NonPositiveTotal(total));
    }
    Ok(x.data()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v / total * (total / v).ln())
        .sum())
}

/// Replaces each row sum by `k` copies of `k r_i` and each column sum by `k`
/// copies of `k c_j`.
pub fn clone_margins(margins: &Margins, k: u64) -> Result<Margins> {
    if k == 0 {
        return Err(Error::InvalidArgument("clone factor must be at least 1".into()));
    }
    let expand = |v: &[u64]| -> Vec<u64> {
        v.iter()
            .flat_map(|&x| std::iter::repeat_n(k * x, k as usize))
            .collect()
    };
    Margins::new(&expand(margins.rows()), &expand(margins.cols()))
}

/// Natural log of the Fisher-Yates probability of `table`.
pub fn fisher_yates_log_mass(table: &ContingencyTable, margins: &Margins) -> Result<f64> {
    table.check_margins(margins)?;
    let lf = |v: &[u64]| v.iter().map(|&x| ln_factorial(x)).sum::<f64>();
    Ok(lf(margins.rows()) + lf(margins.cols()) - ln_factorial(margins.total()) - lf(table.entries()))
}

/// The north-west-corner table: fill greedily left to right, top to bottom.
pub fn north_west_corner(margins: &Margins) -> ContingencyTable {
    let mut rows = margins.rows().to_vec();
    let mut cols = margins.cols().to_vec();
    let mut table = ContingencyTable::zeros(margins.m(), margins.n());
    let (mut i, mut j) = (0, 0);
    while i < rows.len() && j < cols.len() {
        let v = rows[i].min(cols[j]);
        table.set(i, j, v);
        rows[i] -= v;
        cols[j] -= v;
        if rows[i] == 0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    table
}
