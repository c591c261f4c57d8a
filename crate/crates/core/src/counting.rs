//! Exact counting, enumeration and exactly uniform sampling of tables.
//!
//! `count(j, rho)` is the number of ways to fill columns `j..n` when the rows
//! still need the sums `rho`. It satisfies
//!
//! ```text
//! count(n, 0) = 1,  count(n, rho != 0) = 0,
//! count(j, rho) = sum over columns d <= rho with sum(d) = c_j of count(j + 1, rho - d)
//! ```
//!
//! and `count(0, R) = |Sigma(R, C)|`. The remaining columns do not care which
//! row carries which residual, so `count(j, rho)` only depends on the multiset
//! of `rho` and states are keyed by the sorted residual vector.

use std::collections::{HashMap, HashSet};

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ContingencyTable, Margins};
use crate::rng::child_stream;

pub const DEFAULT_BUDGET: usize = 10_000_000;

type Residual = Vec<u64>;

fn canonical(rho: &[u64]) -> Residual {
    let mut key = rho.to_vec();
    key.sort_unstable();
    key
}

/// Calls `visit` with every vector `d` satisfying `0 <= d_i <= cap_i` and
/// `sum(d) = total`, in lexicographic order.
fn for_each_bounded_composition(cap: &[u64], total: u64, mut visit: impl FnMut(&[u64])) {
    let k = cap.len();
    let mut suffix = vec![0u64; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + cap[i];
    }
    if suffix[0] < total {
        return;
    }
    let mut d = vec![0u64; k];
    fn rec(i: usize, rem: u64, cap: &[u64], suffix: &[u64], d: &mut [u64], visit: &mut dyn FnMut(&[u64])) {
        if i == cap.len() {
            if rem == 0 {
                visit(d);
            }
            return;
        }
        let lo = rem.saturating_sub(suffix[i + 1]);
        let hi = rem.min(cap[i]);
        for v in lo..=hi {
            d[i] = v;
            rec(i + 1, rem - v, cap, suffix, d, visit);
        }
        d[i] = 0;
    }
    rec(0, total, cap, &suffix, &mut d, &mut visit);
}

/// Memoized column-by-column counts for one set of margins.
#[derive(Debug)]
pub struct DpTable {
    margins: Margins,
    /// The recursion runs over the columns of `work`, which is `margins` or
    /// its transpose, whichever has the shorter residual vector.
    work: Margins,
    transposed: bool,
    /// `levels[j]` maps sorted residuals to `count(j, rho)`.
    levels: Vec<HashMap<Residual, BigUint>>,
}

impl DpTable {
    pub fn build(margins: &Margins, budget: usize) -> Result<Self> {
        let transposed = margins.m() > margins.n();
        let work = if transposed { margins.transpose() } else { margins.clone() };
        let cols = work.cols();
        let n = cols.len();

        // Forward pass: the reachable residuals at each column.
        let mut frontier: Vec<HashSet<Residual>> = Vec::with_capacity(n + 1);
        frontier.push(HashSet::from([canonical(work.rows())]));
        let mut states = 1usize;
        for &c in cols {
            let mut next = HashSet::new();
            for rho in frontier.last().expect("frontier starts non-empty") {
                for_each_bounded_composition(rho, c, |d| {
                    let child: Residual = rho.iter().zip(d).map(|(r, x)| r - x).collect();
                    next.insert(canonical(&child));
                });
            }
            states += next.len();
            if states > budget {
                return Err(Error::BudgetExceeded {
                    budget,
                    estimate: state_estimate(&work),
                });
            }
            frontier.push(next);
        }

        // Backward pass.
        let mut levels: Vec<HashMap<Residual, BigUint>> = vec![HashMap::new(); n + 1];
        for rho in frontier.pop().expect("n + 1 levels") {
            let value = if rho.iter().all(|&r| r == 0) { BigUint::one() } else { BigUint::zero() };
            levels[n].insert(rho, value);
        }
        for j in (0..n).rev() {
            let states = frontier.pop().expect("n + 1 levels");
            let (head, tail) = levels.split_at_mut(j + 1);
            let below = &tail[0];
            let here = &mut head[j];
            here.reserve(states.len());
            for rho in states {
                let mut total = BigUint::zero();
                let mut child = vec![0u64; rho.len()];
                for_each_bounded_composition(&rho, cols[j], |d| {
                    for ((slot, r), x) in child.iter_mut().zip(&rho).zip(d) {
                        *slot = r - x;
                    }
                    child.sort_unstable();
                    if let Some(v) = below.get(&child) {
                        total += v;
                    }
                });
                here.insert(rho, total);
            }
        }

        Ok(DpTable {
            margins: margins.clone(),
            work,
            transposed,
            levels,
        })
    }

    pub fn margins(&self) -> &Margins {
        &self.margins
    }

    /// `|Sigma(R, C)|`.
    pub fn count(&self) -> &BigUint {
        self.levels[0]
            .get(&canonical(self.work.rows()))
            .expect("root state is always present")
    }

    /// Number of memoized states.
    pub fn states(&self) -> usize {
        self.levels.iter().map(HashMap::len).sum()
    }

    /// `count(j, rho)` for the residual `rho` (any order) before column `j`
    /// of the working orientation.
    fn lookup(&self, j: usize, rho: &[u64]) -> Option<&BigUint> {
        self.levels[j].get(&canonical(rho))
    }

    /// An exactly uniform table: column `j` takes the vector `d` with
    /// probability `count(j + 1, rho - d) / count(j, rho)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ContingencyTable {
        let (m, n) = (self.work.m(), self.work.n());
        let mut rho = self.work.rows().to_vec();
        let mut table = ContingencyTable::zeros(m, n);
        let mut child = vec![0u64; m];
        for j in 0..n {
            let total = self.lookup(j, &rho).expect("reachable state");
            let target = rng.gen_biguint_below(total);
            let mut acc = BigUint::zero();
            let mut chosen: Option<Vec<u64>> = None;
            for_each_bounded_composition(&rho, self.work.cols()[j], |d| {
                if chosen.is_some() {
                    return;
                }
                for ((slot, r), x) in child.iter_mut().zip(&rho).zip(d) {
                    *slot = r - x;
                }
                if let Some(v) = self.lookup(j + 1, &child) {
                    acc += v;
                    if acc > target {
                        chosen = Some(d.to_vec());
                    }
                }
            });
            let d = chosen.expect("cumulative counts reach the total");
            for (i, &x) in d.iter().enumerate() {
                table.set(i, j, x);
                rho[i] -= x;
            }
        }
        if self.transposed {
            transpose(&table)
        } else {
            table
        }
    }

    /// `count` draws, draw `k` from child stream `k` of `seed`.
    pub fn sample_many(&self, seed: u64, count: usize) -> Vec<ContingencyTable> {
        (0..count)
            .into_par_iter()
            .map(|k| self.sample(&mut child_stream(seed, k as u64)))
            .collect()
    }
}

fn state_estimate(work: &Margins) -> u128 {
    work.rows()
        .iter()
        .fold(work.n() as u128 + 1, |acc, &r| acc.saturating_mul(r as u128 + 1))
}

fn transpose(t: &ContingencyTable) -> ContingencyTable {
    let (m, n) = t.shape();
    let mut out = ContingencyTable::zeros(n, m);
    for i in 0..m {
        for j in 0..n {
            out.set(j, i, t.get(i, j));
        }
    }
    out
}

/// `|Sigma(R, C)|` with the default state budget.
pub fn count_tables(margins: &Margins) -> Result<BigUint> {
    count_tables_with_budget(margins, DEFAULT_BUDGET)
}

pub fn count_tables_with_budget(margins: &Margins, budget: usize) -> Result<BigUint> {
    Ok(DpTable::build(margins, budget)?.count().clone())
}

/// Natural log of a big count.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if let Some(v) = x.to_f64().filter(|v| v.is_finite()) {
        return v.ln();
    }
    let shift = x.bits().saturating_sub(64);
    let top = (x >> shift).to_f64().expect("64-bit prefix fits in f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// All tables with the given margins in lexicographic row-major order.
pub fn enumerate_tables(margins: &Margins, cap: usize) -> Result<Vec<ContingencyTable>> {
    let (m, n) = (margins.m(), margins.n());
    let mut rows = margins.rows().to_vec();
    let mut cols = margins.cols().to_vec();
    let mut current = ContingencyTable::zeros(m, n);
    let mut out = Vec::new();

    fn rec(
        k: usize,
        n: usize,
        rows: &mut [u64],
        cols: &mut [u64],
        current: &mut ContingencyTable,
        out: &mut Vec<ContingencyTable>,
        cap: usize,
    ) -> Result<()> {
        let m = rows.len();
        if k == m * n {
            if out.len() == cap {
                return Err(Error::CapExceeded { cap });
            }
            out.push(current.clone());
            return Ok(());
        }
        let (i, j) = (k / n, k % n);
        let later_cols: u64 = cols[j + 1..].iter().sum();
        let lo = rows[i].saturating_sub(later_cols);
        let hi = rows[i].min(cols[j]);
        for v in lo..=hi {
            current.set(i, j, v);
            rows[i] -= v;
            cols[j] -= v;
            let result = rec(k + 1, n, rows, cols, current, out, cap);
            rows[i] += v;
            cols[j] += v;
            result?;
        }
        current.set(i, j, 0);
        Ok(())
    }

    rec(0, n, &mut rows, &mut cols, &mut current, &mut out, cap)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::child_stream;
    use proptest::prelude::*;

    fn margins(r: &[u64], c: &[u64]) -> Margins {
        Margins::new(r, c).unwrap()
    }

    fn count(r: &[u64], c: &[u64]) -> u64 {
        count_tables(&margins(r, c)).unwrap().to_u64().unwrap()
    }

    #[test]
    fn small_counts() {
        assert_eq!(count(&[1, 1], &[1, 1]), 2);
        assert_eq!(count(&[1, 1, 1], &[1, 1, 1]), 6);
        assert_eq!(count(&[2, 2], &[2, 2]), 3);
        assert_eq!(count(&[5], &[1, 2, 2]), 1);
        // 4x4 permutation matrices, and 3x3 magic-square style counts.
        assert_eq!(count(&[1; 4], &[1; 4]), 24);
        assert_eq!(count(&[2, 2, 2], &[2, 2, 2]), 21);
    }

    #[test]
    fn larger_known_count() {
        // Both values checked by brute force over all cell assignments.
        assert_eq!(count(&[3, 3, 3], &[3, 3, 3]), 55);
        assert_eq!(count(&[2; 4], &[2; 4]), 282);
    }

    #[test]
    fn enumeration_examples() {
        let tables = enumerate_tables(&margins(&[1, 1], &[1, 1]), 10).unwrap();
        let rows: Vec<_> = tables.iter().map(ContingencyTable::to_rows).collect();
        assert_eq!(rows, vec![vec![vec![0, 1], vec![1, 0]], vec![vec![1, 0], vec![0, 1]]]);

        let m = margins(&[2, 1], &[1, 1, 1]);
        let tables = enumerate_tables(&m, 10).unwrap();
        assert_eq!(tables.len(), 3);
        let mut cols: Vec<usize> = tables.iter().map(|t| t.row(1).iter().position(|&v| v == 1).unwrap()).collect();
        cols.sort();
        assert_eq!(cols, vec![0, 1, 2]);
        assert!(tables.iter().all(|t| t.has_margins(&m)));

        assert!(matches!(
            enumerate_tables(&margins(&[1, 1, 1], &[1, 1, 1]), 5),
            Err(Error::CapExceeded { cap: 5 })
        ));
    }

    #[test]
    fn enumeration_is_sorted_and_unique() {
        let tables = enumerate_tables(&margins(&[3, 2, 1], &[2, 2, 2]), 1000).unwrap();
        assert!(tables.windows(2).all(|w| w[0].entries() < w[1].entries()));
    }

    #[test]
    fn budget_is_enforced() {
        let m = margins(&[40; 5], &[5; 40]);
        assert!(matches!(
            DpTable::build(&m, 1000),
            Err(Error::BudgetExceeded { budget: 1000, .. })
        ));
    }

    #[test]
    fn dp_sampler_replays() {
        let dp = DpTable::build(&margins(&[3, 2, 1], &[2, 2, 2]), DEFAULT_BUDGET).unwrap();
        let a = dp.sample(&mut child_stream(11, 0));
        let b = dp.sample(&mut child_stream(11, 0));
        assert_eq!(a, b);
        assert!(a.has_margins(dp.margins()));
        assert_eq!(dp.sample_many(11, 3)[0], a);
    }

    #[test]
    fn transposed_orientation_samples_valid_tables() {
        let m = margins(&[1, 2, 1, 3], &[4, 3]);
        let dp = DpTable::build(&m, DEFAULT_BUDGET).unwrap();
        for t in dp.sample_many(5, 50) {
            assert!(t.has_margins(&m));
        }
    }

    #[test]
    fn ln_of_huge_counts() {
        let x = BigUint::one() << 2000u32;
        assert!((ln_biguint(&x) - 2000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((ln_biguint(&BigUint::from(1000u32)) - 1000f64.ln()).abs() < 1e-12);
    }

    fn small_margins() -> impl Strategy<Value = Margins> {
        (1usize..4, 1usize..4)
            .prop_flat_map(|(m, n)| (proptest::collection::vec(0u64..4, m * n), Just((m, n))))
            .prop_filter_map("needs positive margins", |(cells, (m, n))| {
                let t = ContingencyTable::new(m, n, cells).ok()?;
                let rows: Vec<u64> = t.row_sums();
                let cols: Vec<u64> = t.col_sums();
                Margins::new(&rows, &cols).ok()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn count_matches_enumeration(m in small_margins()) {
            let c = count_tables(&m).unwrap().to_usize().unwrap();
            prop_assert_eq!(enumerate_tables(&m, 1_000_000).unwrap().len(), c);
        }

        #[test]
        fn count_is_symmetric(m in small_margins(), rot in 0usize..4) {
            let c = count_tables(&m).unwrap();
            prop_assert_eq!(&count_tables(&m.transpose()).unwrap(), &c);
            let mut rows = m.rows().to_vec();
            let mut cols = m.cols().to_vec();
            let len = rows.len();
            rows.rotate_left(rot % len);
            cols.reverse();
            prop_assert_eq!(&count_tables(&Margins::new(&rows, &cols).unwrap()).unwrap(), &c);
        }
    }
}
