//! Goodness-of-fit helpers used to check the samplers.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn upper_tail(statistic: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(dist.sf(statistic))
}

/// Pearson test of `draws` against the uniform distribution on `support`.
/// Draws outside the support make the test fail outright.
pub fn chi_square_uniform<T: Eq + Hash>(draws: &[T], support: &[T]) -> Result<ChiSquareResult> {
    if support.is_empty() {
        return Err(Error::InvalidArgument("empty support".into()));
    }
    let index: HashMap<&T, usize> = support.iter().enumerate().map(|(k, v)| (v, k)).collect();
    let mut observed = vec![0u64; support.len()];
    for d in draws {
        match index.get(d) {
            Some(&k) => observed[k] += 1,
            None => return Err(Error::InvalidArgument("draw outside the support".into())),
        }
    }
    let expected = draws.len() as f64 / support.len() as f64;
    let statistic = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let dof = support.len() - 1;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof)?,
    })
}

/// Pearson homogeneity test of two samples over the union of their values.
pub fn chi_square_two_sample<T: Eq + Hash + Clone>(a: &[T], b: &[T]) -> Result<ChiSquareResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("both samples must be non-empty".into()));
    }
    let mut counts: HashMap<T, [u64; 2]> = HashMap::new();
    for v in a {
        counts.entry(v.clone()).or_default()[0] += 1;
    }
    for v in b {
        counts.entry(v.clone()).or_default()[1] += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let statistic = counts
        .values()
        .map(|&[x, y]| {
            let cell = (x + y) as f64;
            let (ea, eb) = (cell * na / total, cell * nb / total);
            (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb
        })
        .sum();
    let dof = counts.len() - 1;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof)?,
    })
}

/// `sqrt(p (1 - p) / n)`.
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}
