//! Pooled space–ensemble estimators with jackknife errors.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Field;

/// Number of spatial blocks used as jackknife units for a single replica.
const SPATIAL_BLOCKS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|estimate - value|` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.estimate - value).abs() / self.std_error
    }
}

/// Mean and jackknife standard error of per-unit means weighted by unit size.
pub fn jackknife(sums: &[f64], counts: &[f64]) -> Estimate {
    let total: f64 = sums.iter().sum();
    let count: f64 = counts.iter().sum();
    let estimate = total / count;
    let m = sums.len();
    if m < 2 {
        return Estimate {
            estimate,
            std_error: f64::NAN,
        };
    }
    let loo: Vec<f64> = sums
        .iter()
        .zip(counts)
        .map(|(s, c)| (total - s) / (count - c))
        .collect();
    let bar = loo.iter().sum::<f64>() / m as f64;
    let ss: f64 = loo.iter().map(|x| (x - bar).powi(2)).sum();
    Estimate {
        estimate,
        std_error: ((m - 1) as f64 / m as f64 * ss).sqrt(),
    }
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> Estimate {
    let ones = vec![1.0; xs.len()];
    jackknife(xs, &ones)
}

/// Covariance at each lattice lag, pooling spatial and ensemble averages.
///
/// The mean is estimated once from all samples. Jackknife units are the
/// replicas, or spatial blocks along the first axis when there is only one.
pub fn empirical_covariance(
    samples: &[Field],
    lags: &[Vec<i64>],
) -> Result<Vec<(Vec<i64>, Estimate)>> {
    let first = samples
        .first()
        .ok_or_else(|| invalid("samples", "need at least one sample"))?;
    let total: f64 = samples.iter().map(|f| f.values().iter().sum::<f64>()).sum();
    let mean = total / (samples.len() * first.grid().len()) as f64;
    covariance_about(samples, lags, mean)
}

/// [`empirical_covariance`] about a known mean.
pub fn covariance_about(
    samples: &[Field],
    lags: &[Vec<i64>],
    mean: f64,
) -> Result<Vec<(Vec<i64>, Estimate)>> {
    let first = samples
        .first()
        .ok_or_else(|| invalid("samples", "need at least one sample"))?;
    let grid = first.grid();
    if samples.iter().any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let n = grid.points_per_axis() as i64;
    let d = grid.dim();
    if let Some(bad) = lags.iter().find(|l| l.len() != d) {
        return Err(invalid("lags", format!("lag {bad:?} has wrong dimension")));
    }
    let units = if samples.len() >= 2 { samples.len() } else { SPATIAL_BLOCKS };
    let block_rows = (grid.points_per_axis() / SPATIAL_BLOCKS).max(1);
    let stride0 = grid.len() / grid.points_per_axis();

    let mut out = Vec::with_capacity(lags.len());
    for lag in lags {
        let mut sums = vec![0.0; units];
        let mut counts = vec![0.0; units];
        let shift: Vec<Vec<usize>> = lag
            .iter()
            .map(|&l| (0..n).map(|j| (j + l).rem_euclid(n) as usize).collect())
            .collect();
        for (r, f) in samples.iter().enumerate() {
            let v = f.values();
            let mut idx = vec![0usize; d];
            for (flat, &x) in v.iter().enumerate() {
                let other = idx
                    .iter()
                    .zip(&shift)
                    .fold(0usize, |acc, (&j, tab)| acc * n as usize + tab[j]);
                let prod = (x - mean) * (v[other] - mean);
                let unit = if samples.len() >= 2 {
                    r
                } else {
                    ((flat / stride0) / block_rows).min(units - 1)
                };
                sums[unit] += prod;
                counts[unit] += 1.0;
                for slot in idx.iter_mut().rev() {
                    *slot += 1;
                    if *slot < n as usize {
                        break;
                    }
                    *slot = 0;
                }
            }
        }
        out.push((lag.clone(), jackknife(&sums, &counts)));
    }
    Ok(out)
}
