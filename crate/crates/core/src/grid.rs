//! Periodic lattices and the scalar fields that live on them.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Smallest supported number of points per axis.
pub const MIN_POINTS: usize = 8;

/// A periodic hypercubic lattice `[-extent/2, extent/2)^dim` with `n` points
/// per axis.
///
/// Coordinates are centred: index `j` sits at `(j - n/2) * h`, so the origin
/// is the lattice point with all indices equal to `n/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    extent: f64,
    spacing: f64,
    wavenumbers: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if n < MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= {MIN_POINTS}, got {n}"
            )));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "extent must be positive and finite, got {extent}"
            )));
        }
        n.checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidGrid("grid too large".into()))?;
        let wavenumbers = (0..n)
            .map(|j| 2.0 * PI * signed_mode(j, n) as f64 / extent)
            .collect();
        Ok(Self {
            dim,
            n,
            extent,
            spacing: extent / n as f64,
            wavenumbers,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Angular wavenumbers in FFT storage order: `k_j = 2 pi m_j / extent`
    /// with `m_j = j` for `j < n/2` and `m_j = j - n` otherwise.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Total number of lattice points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one lattice cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Physical coordinate of index `j` along any axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.spacing
    }

    /// Row-major multi-index of a flat index (last axis fastest).
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.n + j % self.n)
    }

    /// Physical position of a flat index.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .into_iter()
            .map(|j| self.coordinate(j))
            .collect()
    }

    /// Wrap a coordinate displacement into `[-extent/2, extent/2)`.
    pub fn wrap_displacement(&self, dx: f64) -> f64 {
        let l = self.extent;
        dx - l * ((dx + 0.5 * l) / l).floor()
    }
}

/// Signed Fourier mode number of FFT storage index `j`.
pub(crate) fn signed_mode(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Scalar field on a [`Grid`] at a physical time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !time.is_finite() {
            return Err(invalid("time", "must be finite"));
        }
        Ok(Self { grid, values, time })
    }

    /// Internal constructor for values produced by finite arithmetic on
    /// finite inputs.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { grid, values, time }
    }

    pub fn zeros(grid: &Grid, time: f64) -> Self {
        Self::constant(grid, 0.0, time)
    }

    pub fn constant(grid: &Grid, value: f64, time: f64) -> Self {
        Self::from_parts(grid.clone(), vec![value; grid.len()], time)
    }

    /// Sample `f(position)` at every lattice point.
    pub fn from_fn(grid: &Grid, time: f64, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut pos = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|flat| {
                for (p, j) in pos.iter_mut().zip(grid.unflatten(flat)) {
                    *p = grid.coordinate(j);
                }
                f(&pos)
            })
            .collect();
        Self::new(grid.clone(), values, time)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Apply a pointwise map. Fails if the map produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            self.time,
        )
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_parts(
            self.grid.clone(),
            self.values.iter().map(|v| a * v).collect(),
            self.time,
        )
    }

    /// `a * self + b * other`, keeping `self`'s time.
    pub fn axpby(&self, a: f64, other: &Field, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_parts(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            self.time,
        ))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &Field) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Periodic multilinear interpolation at a physical point.
    pub fn interpolate(&self, point: &[f64]) -> f64 {
        let g = &self.grid;
        let n = g.n;
        let d = g.dim;
        debug_assert_eq!(point.len(), d);
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let s = point[a] / g.spacing + (n / 2) as f64;
            let fl = s.floor();
            frac[a] = s - fl;
            base[a] = (fl as i64).rem_euclid(n as i64) as usize;
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let up = (corner >> a) & 1 == 1;
                idx[a] = if up { (base[a] + 1) % n } else { base[a] };
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * self.values[g.flatten(&idx)];
            }
        }
        acc
    }
}
