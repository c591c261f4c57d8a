//! The lattice of integer matrices with zero margins and the t-scaling map.
//!
//! The lattice is spanned by the 2x2 sign patterns `U_ij` with `+1` at
//! `(i, j)` and `(i+1, j+1)` and `-1` at `(i, j+1)` and `(i+1, j)`. The
//! coordinate of `x` along `U_ij` is the top-left partial sum
//! `sum_{a <= i, b <= j} x_ab`, so integer matrices have integer
//! coordinates and rounding to the half-open unit cell is a floor of each
//! coordinate.
//!
//! The map `T` sends a table `D` with margins `(R, C)` to the rounding of
//! `D / t + B` relative to `D_1`. All of it is done on numerators over `t`,
//! so rounding is integer floor division.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::counting::enumerate_tables;
use crate::error::{Error, Result};
use crate::model::{north_west_corner, ContingencyTable, EntrySet, Margins};

/// Dense row-major integer matrix, serialized as nested arrays.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i64>>", into = "Vec<Vec<i64>>")]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> i64) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        IntMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::ShapeMismatch {
                expected: (m, n),
                got: (m, bad.len()),
            });
        }
        Ok(IntMatrix {
            rows: m,
            cols: n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_table(d: &ContingencyTable) -> Self {
        let (m, n) = d.shape();
        IntMatrix {
            rows: m,
            cols: n,
            data: d.entries().iter().map(|&v| v as i64).collect(),
        }
    }

    /// `None` when an entry is negative.
    pub fn to_table(&self) -> Option<ContingencyTable> {
        let entries = self
            .data
            .iter()
            .map(|&v| u64::try_from(v).ok())
            .collect::<Option<Vec<u64>>>()?;
        ContingencyTable::new(self.rows, self.cols, entries).ok()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        if self.cols == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.data.chunks(self.cols).map(<[i64]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<i64> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<i64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.get(i, j)).sum()).collect()
    }

    fn zip_with(&self, other: &IntMatrix, f: impl Fn(i64, i64) -> i64) -> Result<IntMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &IntMatrix) -> Result<IntMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &IntMatrix) -> Result<IntMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, k: i64) -> IntMatrix {
        IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * k).collect(),
        }
    }

    pub fn sum_over(&self, s: &EntrySet) -> Result<i64> {
        s.check_bounds(self.rows, self.cols)?;
        Ok(s.iter().map(|(i, j)| self.get(i, j)).sum())
    }
}

impl TryFrom<Vec<Vec<i64>>> for IntMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<i64>>) -> Result<Self> {
        IntMatrix::from_rows(rows)
    }
}

impl From<IntMatrix> for Vec<Vec<i64>> {
    fn from(x: IntMatrix) -> Self {
        x.to_rows()
    }
}

/// A rational matrix `numer / denom` with `denom > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledMatrix {
    pub numer: IntMatrix,
    pub denom: i64,
}

fn partial_sums<T>(x: &[Vec<T>], zero: T) -> Vec<Vec<T>>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let m = x.len();
    let n = x.first().map_or(0, Vec::len);
    let mut p = vec![vec![zero; n]; m];
    for i in 0..m {
        for j in 0..n {
            let up = if i > 0 { p[i - 1][j] } else { zero };
            let left = if j > 0 { p[i][j - 1] } else { zero };
            let diag = if i > 0 && j > 0 { p[i - 1][j - 1] } else { zero };
            p[i][j] = x[i][j] + up + left - diag;
        }
    }
    p
}

/// Coordinates of an integer matrix with zero margins in the `U_ij` basis,
/// as an `(m-1) x (n-1)` array.
pub fn lattice_coords(x: &IntMatrix) -> Result<IntMatrix> {
    let (m, n) = x.shape();
    if x.row_sums().iter().chain(&x.col_sums()).any(|&s| s != 0) {
        return Err(Error::NotInSubspace);
    }
    let p = partial_sums(&x.to_rows(), 0i64);
    Ok(IntMatrix::from_fn(m.saturating_sub(1), n.saturating_sub(1), |i, j| p[i][j]))
}

/// Real-valued version of [`lattice_coords`]; margins must vanish within `1e-9`.
pub fn lattice_coords_real(x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = x.len();
    let n = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch {
            expected: (m, n),
            got: (m, 0),
        });
    }
    let row_ok = x.iter().all(|r| r.iter().sum::<f64>().abs() <= 1e-9);
    let col_ok = (0..n).all(|j| x.iter().map(|r| r[j]).sum::<f64>().abs() <= 1e-9);
    if !(row_ok && col_ok) {
        return Err(Error::NotInSubspace);
    }
    let p = partial_sums(x, 0.0);
    Ok((0..m.saturating_sub(1))
        .map(|i| p[i][..n.saturating_sub(1)].to_vec())
        .collect())
}

fn second_difference<T>(c: &[Vec<T>], m: usize, n: usize, zero: T) -> Vec<Vec<T>>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let at = |i: isize, j: isize| -> T {
        if i < 0 || j < 0 || i as usize >= m - 1 || j as usize >= n - 1 {
            zero
        } else {
            c[i as usize][j as usize]
        }
    };
    (0..m as isize)
        .map(|a| {
            (0..n as isize)
                .map(|b| at(a, b) - at(a - 1, b) - at(a, b - 1) + at(a - 1, b - 1))
                .collect()
        })
        .collect()
}

/// `sum c_ij U_ij`, an `(rows+1) x (cols+1)` matrix with zero margins.
pub fn reconstruct_from_coords(c: &IntMatrix) -> IntMatrix {
    let (m, n) = (c.rows + 1, c.cols + 1);
    let rows = second_difference(&c.to_rows(), m, n, 0i64);
    IntMatrix::from_rows(rows).expect("rectangular by construction")
}

pub fn reconstruct_from_coords_real(c: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = c.len() + 1;
    let n = c.first().map_or(0, Vec::len) + 1;
    second_difference(c, m, n, 0.0)
}

fn check_same_margins(a: &IntMatrix, b: &IntMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            got: b.shape(),
        });
    }
    if a.row_sums() != b.row_sums() || a.col_sums() != b.col_sums() {
        return Err(Error::MarginMismatch(format!(
            "margins {:?}/{:?} differ from {:?}/{:?}",
            a.row_sums(),
            a.col_sums(),
            b.row_sums(),
            b.col_sums()
        )));
    }
    Ok(())
}

/// The unique `y` in `anchor + lattice` whose coordinates relative to `x`
/// lie in `[0, 1)`.
pub fn round_to_lattice(x: &ScaledMatrix, anchor: &IntMatrix) -> Result<IntMatrix> {
    if x.denom <= 0 {
        return Err(Error::InvalidArgument(format!("denominator must be positive, got {}", x.denom)));
    }
    let scaled_anchor = anchor.scale(x.denom);
    check_same_margins(&x.numer, &scaled_anchor)?;
    let coords = lattice_coords(&x.numer.sub(&scaled_anchor)?)?;
    let floored = IntMatrix {
        rows: coords.rows,
        cols: coords.cols,
        data: coords.data.iter().map(|&v| v.div_euclid(x.denom)).collect(),
    };
    anchor.add(&reconstruct_from_coords(&floored))
}

/// `t`, the base table `D_0`, `D_1 = ceil(D_0 / t) + 2` and the margins
/// `(R', C')` of `D_1`. `B = D_1 - D_0 / t` is kept as `t B`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingContext {
    t: u64,
    d0: ContingencyTable,
    d1: ContingencyTable,
    #[serde(skip)]
    b_numer: IntMatrix,
    scaled_margins: Margins,
    #[serde(skip)]
    margins: Margins,
}

impl ScalingContext {
    /// Uses the north-west-corner table as `D_0` when none is given.
    pub fn new(margins: &Margins, t: u64, d0: Option<ContingencyTable>) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidArgument("t must be a positive integer".into()));
        }
        let d0 = match d0 {
            Some(d) => {
                d.check_margins(margins)?;
                d
            }
            None => north_west_corner(margins),
        };
        let (m, n) = d0.shape();
        let d1_entries: Vec<u64> = d0.entries().iter().map(|&v| v.div_ceil(t) + 2).collect();
        let d1 = ContingencyTable::new(m, n, d1_entries)?;
        let ti = t as i64;
        let b_numer = IntMatrix::from_table(&d1).scale(ti).sub(&IntMatrix::from_table(&d0))?;
        let scaled_margins = Margins::new(&d1.row_sums(), &d1.col_sums())?;
        let ctx = ScalingContext {
            t,
            d0,
            d1,
            b_numer,
            scaled_margins,
            margins: margins.clone(),
        };
        debug_assert!(ctx.b_in_range() && ctx.scaled_margins_in_range());
        Ok(ctx)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn d0(&self) -> &ContingencyTable {
        &self.d0
    }

    pub fn d1(&self) -> &ContingencyTable {
        &self.d1
    }

    pub fn margins(&self) -> &Margins {
        &self.margins
    }

    pub fn scaled_margins(&self) -> &Margins {
        &self.scaled_margins
    }

    /// `B` as a rational matrix over `t`.
    pub fn b(&self) -> ScaledMatrix {
        ScaledMatrix {
            numer: self.b_numer.clone(),
            denom: self.t as i64,
        }
    }

    /// `2 <= b_ij < 3` entrywise, checked on `t b_ij`.
    pub fn b_in_range(&self) -> bool {
        let t = self.t as i64;
        self.b_numer.data().iter().all(|&v| 2 * t <= v && v < 3 * t)
    }

    /// `r_i / t + 2n <= r'_i <= r_i / t + 3n` and the column analog, checked
    /// after multiplying through by `t`.
    pub fn scaled_margins_in_range(&self) -> bool {
        let t = self.t as i128;
        let (m, n) = (self.margins.m() as i128, self.margins.n() as i128);
        let within = |orig: &[u64], scaled: &[u64], k: i128| {
            orig.iter().zip(scaled).all(|(&r, &rs)| {
                let gap = t * rs as i128 - r as i128;
                2 * k * t <= gap && gap <= 3 * k * t
            })
        };
        within(self.margins.rows(), self.scaled_margins.rows(), n)
            && within(self.margins.cols(), self.scaled_margins.cols(), m)
    }

    /// `T(D)`, the rounding of `D / t + B` relative to `D_1`.
    pub fn apply(&self, d: &ContingencyTable) -> Result<ContingencyTable> {
        d.check_margins(&self.margins)?;
        // t (D / t + B) - t D_1 = D - D_0.
        let diff = IntMatrix::from_table(d).sub(&IntMatrix::from_table(&self.d0))?;
        let coords = lattice_coords(&diff)?;
        let t = self.t as i64;
        let floored = IntMatrix {
            rows: coords.rows,
            cols: coords.cols,
            data: coords.data.iter().map(|&v| v.div_euclid(t)).collect(),
        };
        let y = IntMatrix::from_table(&self.d1).add(&reconstruct_from_coords(&floored))?;
        y.to_table().ok_or_else(|| {
            Error::DomainViolation(format!("scaled table has a negative entry: {:?}", y.to_rows()))
        })
    }

    /// `sigma_S(D) <= t sigma_S(T(D)) <= sigma_S(D) + 5 t |S|`, in integers.
    pub fn sum_bounds_hold(&self, d: &ContingencyTable, td: &ContingencyTable, s: &EntrySet) -> Result<bool> {
        let sd = IntMatrix::from_table(d).sum_over(s)?;
        let st = IntMatrix::from_table(td).sum_over(s)?;
        let t = self.t as i64;
        Ok(sd <= t * st && t * st <= sd + 5 * t * s.len() as i64)
    }
}

pub fn t_scale(ctx: &ScalingContext, d: &ContingencyTable) -> Result<ContingencyTable> {
    ctx.apply(d)
}

/// `|T^{-1}(y)|` by enumerating every table with the source margins.
pub fn preimage_count_check(ctx: &ScalingContext, y: &ContingencyTable, cap: usize) -> Result<BigUint> {
    let mut count = 0u64;
    for d in enumerate_tables(&ctx.margins, cap)? {
        if &ctx.apply(&d)? == y {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

/// Preimage sizes of every image of `T`, from one enumeration pass.
pub fn preimage_counts(ctx: &ScalingContext, cap: usize) -> Result<BTreeMap<ContingencyTable, u64>> {
    let mut counts = BTreeMap::new();
    for d in enumerate_tables(&ctx.margins, cap)? {
        *counts.entry(ctx.apply(&d)?).or_insert(0) += 1;
    }
    Ok(counts)
}

/// `t^{(m-1)(n-1)}`.
pub fn preimage_bound(ctx: &ScalingContext) -> BigUint {
    let exp = (ctx.margins.m() - 1) * (ctx.margins.n() - 1);
    BigUint::from(ctx.t).pow(exp as u32)
}

/// `floor(N / (mn)^6)`, or 1 when that is zero.
pub fn auto_t(margins: &Margins) -> u64 {
    let mn = (margins.m() * margins.n()) as u128;
    let denom = mn.checked_pow(6).unwrap_or(u128::MAX);
    let t = margins.total() as u128 / denom;
    (t as u64).max(1)
}
