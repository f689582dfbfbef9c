//! Fourier-multiplier semigroups on the periodic grid.
//!
//! `P_t = exp(t Δ)` and `P¹_t = exp(t (Δ + 1))` are applied exactly in Fourier
//! space, so the only error they introduce is floating-point rounding.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};

/// Lines gathered per batch when transforming along a strided axis.
const LINE_BATCH: usize = 32;

/// Cached FFT plans and wavenumber tables for one grid.
///
/// Spectra use the real-to-complex half layout: the last axis keeps modes
/// `0..=n/2`, every other axis keeps all `n` modes in FFT order.
pub struct Spectral {
    grid: Grid,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `k^2` per mode for the full axes.
    k2_full: Vec<f64>,
    /// `k^2` per mode for the halved last axis.
    k2_half: Vec<f64>,
    k2_total: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<(usize, usize, u64), Arc<Spectral>>> =
        RefCell::new(HashMap::new());
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.points_per_axis();
        let mut planner = FftPlanner::new();
        let mut real_planner = RealFftPlanner::new();
        let k2_full: Vec<f64> = grid.wavenumbers().iter().map(|k| k * k).collect();
        let k2_half: Vec<f64> = k2_full[..n / 2].iter().copied().chain([k2_full[n / 2]]).collect();
        let mut sp = Self {
            grid: grid.clone(),
            r2c: real_planner.plan_fft_forward(n),
            c2r: real_planner.plan_fft_inverse(n),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            k2_full,
            k2_half,
            k2_total: Vec::new(),
        };
        let mut total = vec![0.0; sp.spectrum_len()];
        for axis in 0..grid.dim() {
            let (stride, len, table) = sp.axis_layout(axis);
            for (flat, t) in total.iter_mut().enumerate() {
                *t += table[(flat / stride) % len];
            }
        }
        sp.k2_total = total;
        sp
    }

    /// Shared per-thread plan for `grid`.
    pub fn for_grid(grid: &Grid) -> Arc<Spectral> {
        let key = (
            grid.dim(),
            grid.points_per_axis(),
            grid.extent().to_bits(),
        );
        PLANS.with(|plans| {
            plans
                .borrow_mut()
                .entry(key)
                .or_insert_with(|| Arc::new(Spectral::new(grid)))
                .clone()
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn half(&self) -> usize {
        self.grid.points_per_axis() / 2 + 1
    }

    /// Number of stored complex modes.
    pub fn spectrum_len(&self) -> usize {
        let n = self.grid.points_per_axis();
        n.pow(self.grid.dim() as u32 - 1) * self.half()
    }

    /// (stride, modes, k^2 table) of one axis in the half layout.
    fn axis_layout(&self, axis: usize) -> (usize, usize, &[f64]) {
        let n = self.grid.points_per_axis();
        let d = self.grid.dim();
        if axis == d - 1 {
            (1, self.half(), &self.k2_half)
        } else {
            (n.pow((d - 2 - axis) as u32) * self.half(), n, &self.k2_full)
        }
    }

    /// Signed angular wavenumber of `flat` along `axis`; the Nyquist mode maps
    /// to zero so that odd multipliers keep real fields real.
    fn odd_wavenumber(&self, flat: usize, axis: usize) -> f64 {
        let n = self.grid.points_per_axis();
        let (stride, len, _) = self.axis_layout(axis);
        let j = (flat / stride) % len;
        if j == n / 2 {
            0.0
        } else {
            self.grid.wavenumbers()[j]
        }
    }

    /// `|k|^2` for every stored mode.
    pub fn k2(&self) -> &[f64] {
        &self.k2_total
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut spec = Vec::new();
        self.forward_into(values, &mut spec);
        spec
    }

    pub fn forward_into(&self, values: &[f64], spec: &mut Vec<Complex64>) {
        let n = self.grid.points_per_axis();
        let m = self.half();
        spec.clear();
        spec.resize(self.spectrum_len(), Complex64::default());
        let mut row = vec![0.0; n];
        let mut scratch = self.r2c.make_scratch_vec();
        for (input, output) in values.chunks(n).zip(spec.chunks_mut(m)) {
            row.copy_from_slice(input);
            self.r2c
                .process_with_scratch(&mut row, output, &mut scratch)
                .expect("buffer sizes match the plan");
        }
        self.strided_axes(spec, false);
    }

    /// Inverse transform (normalised) of a half-layout spectrum.
    pub fn inverse_real(&self, spec: &mut [Complex64], out: &mut [f64]) {
        let n = self.grid.points_per_axis();
        let m = self.half();
        self.strided_axes(spec, true);
        let mut scratch = self.c2r.make_scratch_vec();
        let norm = 1.0 / self.grid.len() as f64;
        for (input, output) in spec.chunks_mut(m).zip(out.chunks_mut(n)) {
            input[0].im = 0.0;
            input[m - 1].im = 0.0;
            self.c2r
                .process_with_scratch(input, output, &mut scratch)
                .expect("buffer sizes match the plan");
            for o in output.iter_mut() {
                *o *= norm;
            }
        }
    }

    /// Multiply by a function of `|k|^2`.
    pub fn apply_radial(&self, spec: &mut [Complex64], f: impl Fn(f64) -> f64) {
        for (c, &k2) in spec.iter_mut().zip(&self.k2_total) {
            *c *= f(k2);
        }
    }

    /// Multiply by `prod_a g(k_a^2)`; `g` is evaluated once per axis mode.
    pub fn apply_separable(&self, spec: &mut [Complex64], g: impl Fn(f64) -> f64) {
        let full: Vec<f64> = self.k2_full.iter().map(|&k2| g(k2)).collect();
        let half: Vec<f64> = self.k2_half.iter().map(|&k2| g(k2)).collect();
        for axis in 0..self.grid.dim() {
            let (stride, len, _) = self.axis_layout(axis);
            let factors = if len == self.half() && stride == 1 { &half } else { &full };
            for (flat, c) in spec.iter_mut().enumerate() {
                *c *= factors[(flat / stride) % len];
            }
        }
    }

    /// Heat multiplier `exp(-t |k|^2)`.
    pub fn apply_heat(&self, spec: &mut [Complex64], t: f64) {
        self.apply_separable(spec, |k2| (-t * k2).exp());
    }

    /// `P_t` in place on raw values. `scratch` is reused between calls.
    pub fn heat_values(&self, values: &mut [f64], t: f64, scratch: &mut Vec<Complex64>) {
        if t == 0.0 {
            return;
        }
        self.forward_into(values, scratch);
        self.apply_heat(scratch, t);
        self.inverse_real(scratch, values);
    }

    /// Complex transforms along every axis but the last.
    fn strided_axes(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.points_per_axis();
        let d = self.grid.dim();
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut lines = Vec::new();
        for axis in 0..d - 1 {
            let (stride, _, _) = self.axis_layout(axis);
            for block in data.chunks_mut(n * stride) {
                let mut j0 = 0;
                while j0 < stride {
                    let width = LINE_BATCH.min(stride - j0);
                    lines.resize(width * n, Complex64::default());
                    for i in 0..n {
                        let row = &block[i * stride + j0..i * stride + j0 + width];
                        for (jj, &v) in row.iter().enumerate() {
                            lines[jj * n + i] = v;
                        }
                    }
                    fft.process_with_scratch(&mut lines, &mut scratch);
                    for i in 0..n {
                        let row = &mut block[i * stride + j0..i * stride + j0 + width];
                        for (jj, v) in row.iter_mut().enumerate() {
                            *v = lines[jj * n + i];
                        }
                    }
                    j0 += width;
                }
            }
        }
    }

    fn filtered(&self, f: &Field, mult: impl Fn(&mut [Complex64])) -> Vec<f64> {
        let mut spec = self.forward(f.values());
        mult(&mut spec);
        let mut out = vec![0.0; self.grid.len()];
        self.inverse_real(&mut spec, &mut out);
        out
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid("t", format!("must be finite and >= 0, got {t}")))
    }
}

/// Heat semigroup `P_t f`; the output time is `f.time() + t`.
pub fn heat(f: &Field, t: f64) -> Result<Field> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let sp = Spectral::for_grid(f.grid());
    let values = sp.filtered(f, |s| sp.apply_heat(s, t));
    Ok(Field::from_parts(f.grid().clone(), values, f.time() + t))
}

/// `P¹_t f = e^t P_t f`.
pub fn heat_plus_one(f: &Field, t: f64) -> Result<Field> {
    Ok(heat(f, t)?.scale(t.exp()))
}

/// `a * exp(-c |k|^2)` applied to `f`; `c >= 0`.
pub fn gaussian_filter(f: &Field, a: f64, c: f64) -> Result<Field> {
    if !(c >= 0.0 && c.is_finite() && a.is_finite()) {
        return Err(invalid("c", format!("need finite c >= 0, got {c}")));
    }
    let sp = Spectral::for_grid(f.grid());
    let values = sp.filtered(f, |s| sp.apply_separable(s, |k2| (-c * k2).exp()));
    Ok(Field::from_parts(f.grid().clone(), values, f.time()).scale(a))
}

/// Spectral gradient, one field per axis. The Nyquist mode of each odd
/// derivative is dropped so that real fields stay real.
pub fn gradient(f: &Field) -> Vec<Field> {
    let sp = Spectral::for_grid(f.grid());
    let grid = f.grid();
    let spec = sp.forward(f.values());
    (0..grid.dim())
        .map(|axis| {
            let mut s = spec.clone();
            for (flat, c) in s.iter_mut().enumerate() {
                *c *= Complex64::new(0.0, sp.odd_wavenumber(flat, axis));
            }
            let mut out = vec![0.0; grid.len()];
            sp.inverse_real(&mut s, &mut out);
            Field::from_parts(grid.clone(), out, f.time())
        })
        .collect()
}

/// Spectral Laplacian `-|k|^2`.
pub fn laplacian(f: &Field) -> Field {
    let sp = Spectral::for_grid(f.grid());
    let values = sp.filtered(f, |s| sp.apply_radial(s, |k2| -k2));
    Field::from_parts(f.grid().clone(), values, f.time())
}

/// Spectral divergence of a vector field given by components.
pub fn divergence(components: &[Field]) -> Result<Field> {
    let first = components
        .first()
        .ok_or_else(|| invalid("components", "empty vector field"))?;
    if components.len() != first.grid().dim() {
        return Err(invalid("components", "one component per axis required"));
    }
    let mut acc = Field::zeros(first.grid(), first.time());
    for (axis, c) in components.iter().enumerate() {
        if c.grid() != first.grid() {
            return Err(Error::GridMismatch);
        }
        let g = gradient(c);
        acc = acc.axpby(1.0, &g[axis], 1.0)?;
    }
    Ok(acc)
}
