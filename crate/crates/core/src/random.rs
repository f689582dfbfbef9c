//! Lattice white noise, the mollified initial datum `eta_eps`, the
//! Bargmann–Fock field and their pathwise coupling.
//!
//! The mollifier is the standard Gaussian density with unit covariance, so
//! `phi^eps` has Fourier transform `exp(-eps^2 |k|^2 / 2)`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Field, Grid};
use crate::schedule::Schedule;
use crate::spectral::{gaussian_filter, gradient};

/// Parameters of the initial datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub alpha: f64,
    /// Width of the mollifier, normally equal to `epsilon`.
    pub mollifier_width: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(epsilon: f64, alpha: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            epsilon,
            alpha,
            mollifier_width: epsilon,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.mollifier_width > 0.0 && self.mollifier_width.is_finite()) {
            return Err(invalid("mollifier_width", "must be positive"));
        }
        Ok(())
    }

    /// Same spec with a different seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Target covariance `sigma^{-d/2} exp(-|x - y|^2 / (8 sigma))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTarget {
    pub sigma: f64,
    pub dim: usize,
}

impl CovarianceTarget {
    pub fn new(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self { sigma, dim })
    }

    pub fn covariance(&self, r: f64) -> f64 {
        self.sigma.powf(-(self.dim as f64) / 2.0) * (-r * r / (8.0 * self.sigma)).exp()
    }
}

/// RNG stream for replica `replica` of a run seeded with `seed`.
///
/// Streams for different replicas never overlap.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Cellwise i.i.d. `N(0, h^{-d})` values.
pub fn sample_white_noise(grid: &Grid, seed: u64) -> Field {
    white_noise_from(grid, &mut replica_rng(seed, 0))
}

/// White noise for one replica of a multi-replica run.
pub fn sample_white_noise_replica(grid: &Grid, seed: u64, replica: u64) -> Field {
    white_noise_from(grid, &mut replica_rng(seed, replica))
}

fn white_noise_from(grid: &Grid, rng: &mut ChaCha8Rng) -> Field {
    let sd = grid.cell_volume().powf(-0.5);
    let values = (0..grid.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect::<Vec<f64>>();
    Field::new(grid.clone(), values, 0.0).expect("normal samples are finite")
}

fn check_resolved(grid: &Grid, width: f64) -> Result<()> {
    if width < 2.0 * grid.spacing() {
        return Err(invalid(
            "mollifier_width",
            format!(
                "width {width} is below twice the grid spacing {}",
                grid.spacing()
            ),
        ));
    }
    Ok(())
}

/// `eta_eps = eps^{d/2 - alpha} (phi^eps * noise)`.
pub fn make_eta_eps(noise: &Field, spec: &NoiseSpec) -> Result<Field> {
    spec.validate()?;
    check_resolved(noise.grid(), spec.mollifier_width)?;
    let d = noise.grid().dim() as f64;
    let w = spec.mollifier_width;
    let amp = spec.epsilon.powf(d / 2.0 - spec.alpha);
    gaussian_filter(noise, amp, 0.5 * w * w)
}

/// Pointwise standard deviation of `eta_eps` on the continuum,
/// `eps^{-alpha} (4 pi)^{-d/4}`.
pub fn eta_eps_std(spec: &NoiseSpec, dim: usize) -> f64 {
    spec.epsilon.powf(-spec.alpha) * (4.0 * PI).powf(-(dim as f64) / 4.0)
}

/// Bargmann–Fock field by spectral factorisation of the target covariance.
pub fn sample_bargmann_fock(grid: &Grid, target: &CovarianceTarget, seed: u64) -> Result<Field> {
    sample_bargmann_fock_replica(grid, target, seed, 0)
}

pub fn sample_bargmann_fock_replica(
    grid: &Grid,
    target: &CovarianceTarget,
    seed: u64,
    replica: u64,
) -> Result<Field> {
    if target.dim != grid.dim() {
        return Err(invalid("dim", "covariance target and grid disagree"));
    }
    let needed = 20.0 * (8.0 * target.sigma).sqrt();
    if grid.extent() < needed {
        return Err(invalid(
            "extent",
            format!("grid extent {} is below 20 sqrt(8 sigma) = {needed}", grid.extent()),
        ));
    }
    let noise = sample_white_noise_replica(grid, seed, replica);
    // Fourier transform of the covariance: (8 pi)^{d/2} exp(-2 sigma |k|^2).
    let amp = (8.0 * PI).powf(grid.dim() as f64 / 4.0);
    gaussian_filter(&noise, amp, target.sigma)
}

/// Which kernel turns the shared noise into `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingKernel {
    /// The limit kernel `K`; `psi` is exactly Bargmann–Fock with `sigma = 1`
    /// up to the mollifier.
    Limit,
    /// The finite-epsilon kernel `K_eps`; `psi = P¹_{t_star} eta_eps` read in
    /// rescaled coordinates.
    Finite,
}

/// `eta_eps` and the rescaled field `psi`, both built from one noise sample.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    /// On the physical grid.
    pub eta_eps: Field,
    /// On the rescaled grid: same lattice, extent divided by `L_eps`.
    pub psi: Field,
}

/// Lattice of the rescaled variable `x / L_eps`.
pub fn rescaled_grid(grid: &Grid, schedule: &Schedule) -> Result<Grid> {
    Grid::new(grid.dim(), grid.points_per_axis(), grid.extent() / schedule.l_eps)
}

/// Build `(eta_eps, psi)` from the white noise of `spec.seed`.
pub fn coupled_pair(
    grid: &Grid,
    spec: &NoiseSpec,
    schedule: &Schedule,
    kernel: CouplingKernel,
) -> Result<CoupledPair> {
    let noise = sample_white_noise(grid, spec.seed);
    coupled_pair_from_noise(&noise, spec, schedule, kernel)
}

pub fn coupled_pair_from_noise(
    noise: &Field,
    spec: &NoiseSpec,
    schedule: &Schedule,
    kernel: CouplingKernel,
) -> Result<CoupledPair> {
    let grid = noise.grid();
    if schedule.d != grid.dim() {
        return Err(invalid("d", "schedule dimension differs from grid dimension"));
    }
    let eta_eps = make_eta_eps(noise, spec)?;
    let w = spec.mollifier_width;
    let d = grid.dim() as f64;
    let l = schedule.l_eps;
    let psi_phys = match kernel {
        CouplingKernel::Limit => {
            // L^{d/2} (8 pi)^{d/4} exp(-L^2 |k|^2) phi^(eps k)
            let amp = l.powf(d / 2.0) * (8.0 * PI).powf(d / 4.0);
            gaussian_filter(noise, amp, l * l + 0.5 * w * w)?
        }
        CouplingKernel::Finite => {
            let ts = schedule.t_star;
            gaussian_filter(&eta_eps, ts.exp(), ts)?
        }
    };
    let psi = Field::new(rescaled_grid(grid, schedule)?, psi_phys.into_values(), 0.0)?;
    Ok(CoupledPair { eta_eps, psi })
}

/// Lag-zero correlation between the `K_eps` and `K` versions of `psi` for the
/// Gaussian mollifier, from the closed-form covariances.
///
/// With `a = t_star + eps^2/2` and `b = L^2 + eps^2/2` it equals
/// `(2 sqrt(a b) / (a + b))^{d/2}`.
pub fn coupling_correlation(schedule: &Schedule, width: f64) -> f64 {
    let a = schedule.t_star + 0.5 * width * width;
    let b = schedule.l_eps.powi(2) + 0.5 * width * width;
    (2.0 * (a * b).sqrt() / (a + b)).powf(schedule.d as f64 / 2.0)
}

/// `|grad f|` at every lattice edge whose endpoints have opposite signs,
/// averaged over the two endpoints.
pub fn nodal_gradients(f: &Field) -> Vec<f64> {
    let grid = f.grid();
    let g = gradient(f);
    let norm: Vec<f64> = (0..grid.len())
        .map(|i| g.iter().map(|c| c.values()[i].powi(2)).sum::<f64>().sqrt())
        .collect();
    let v = f.values();
    let n = grid.points_per_axis();
    let mut out = Vec::new();
    for flat in 0..grid.len() {
        let idx = grid.unflatten(flat);
        for axis in 0..grid.dim() {
            let mut nb = idx.clone();
            nb[axis] = (nb[axis] + 1) % n;
            let other = grid.flatten(&nb);
            if (v[flat] > 0.0) != (v[other] > 0.0) {
                out.push(0.5 * (norm[flat] + norm[other]));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::empirical_covariance;

    fn var(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn white_noise_variance_and_mean() {
        let g = Grid::new(2, 1024, 256.0).unwrap();
        let f = sample_white_noise(&g, 7);
        assert!((var(f.values()) - 16.0).abs() < 0.2);
        assert!(f.mean().abs() <= 4.0 * 4.0 / 1e3);
        let again = sample_white_noise(&g, 7);
        assert_eq!(f.values(), again.values());
        assert_ne!(
            sample_white_noise_replica(&g, 7, 1).values()[..8],
            f.values()[..8]
        );
    }

    #[test]
    fn eta_eps_pointwise_std() {
        let g = Grid::new(2, 256, 12.8).unwrap();
        let spec = NoiseSpec::new(0.1, 0.5, 3).unwrap();
        let mut acc = 0.0;
        let reps = 4;
        for r in 0..reps {
            let noise = sample_white_noise_replica(&g, 3, r);
            acc += var(make_eta_eps(&noise, &spec).unwrap().values());
        }
        let sd = (acc / reps as f64).sqrt();
        let target = 0.1f64.powf(-0.5) * (4.0 * PI).powf(-0.5);
        assert!((sd / target - 1.0).abs() < 0.05, "{sd} vs {target}");
        assert!((eta_eps_std(&spec, 2) - target).abs() < 1e-15);
    }

    #[test]
    fn eta_eps_rejects_unresolved_mollifier_and_is_linear() {
        let g = Grid::new(2, 64, 6.4).unwrap();
        let spec = NoiseSpec::new(0.15, 0.5, 0).unwrap();
        let a = sample_white_noise(&g, 1);
        assert!(make_eta_eps(&a, &spec).is_err());

        let spec = NoiseSpec::new(0.25, 0.5, 0).unwrap();
        let b = sample_white_noise(&g, 2);
        let lhs = make_eta_eps(&a.axpby(1.5, &b, -0.25).unwrap(), &spec).unwrap();
        let rhs = make_eta_eps(&a, &spec)
            .unwrap()
            .axpby(1.5, &make_eta_eps(&b, &spec).unwrap(), -0.25)
            .unwrap();
        assert!(lhs.sup_distance(&rhs).unwrap() <= 1e-12);
        let zero = make_eta_eps(&Field::zeros(&g, 0.0), &spec).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn disjoint_seeds_are_uncorrelated_at_lag_five_eps() {
        let g = Grid::new(2, 256, 12.8).unwrap();
        let spec = NoiseSpec::new(0.1, 0.5, 0).unwrap();
        let a = make_eta_eps(&sample_white_noise(&g, 11), &spec).unwrap();
        let b = make_eta_eps(&sample_white_noise(&g, 12), &spec).unwrap();
        // 5 eps = 10 cells.
        let n = 256;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let x = a.values()[i * n + j];
                let y = b.values()[i * n + (j + 10) % n];
                sab += x * y;
                saa += x * x;
                sbb += y * y;
            }
        }
        assert!((sab / (saa * sbb).sqrt()).abs() < 0.05);
    }

    #[test]
    fn bargmann_fock_extent_precondition() {
        let g = Grid::new(2, 64, 40.0).unwrap();
        let t = CovarianceTarget::new(1.0, 2).unwrap();
        assert!(sample_bargmann_fock(&g, &t, 0).is_err());
        assert!(CovarianceTarget::new(0.0, 2).is_err());
    }

    #[test]
    fn bargmann_fock_covariance() {
        let g = Grid::new(2, 128, 64.0).unwrap();
        let t = CovarianceTarget::new(1.0, 2).unwrap();
        let samples: Vec<Field> = (0..60)
            .map(|r| sample_bargmann_fock_replica(&g, &t, 5, r).unwrap())
            .collect();
        // h = 0.5; lags 0, sqrt(8) is not on the lattice so use (4, 4) -> r^2 = 8.
        let table = empirical_covariance(&samples, &[vec![0, 0], vec![4, 4], vec![2, 0]]).unwrap();
        for (lag, est) in table {
            let r = ((lag[0] * lag[0] + lag[1] * lag[1]) as f64).sqrt() * g.spacing();
            let want = t.covariance(r);
            assert!(
                (est.estimate - want).abs() <= 3.0 * est.std_error + 1e-3,
                "lag {lag:?}: {} +- {} vs {want}",
                est.estimate,
                est.std_error
            );
        }
        assert!((t.covariance(8f64.sqrt()) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(CovarianceTarget::new(4.0, 2).unwrap().covariance(0.0), 0.25);
    }

    #[test]
    fn coupled_pair_is_deterministic_and_psi_has_unit_variance() {
        let g = Grid::new(2, 512, 12.8).unwrap();
        let spec = NoiseSpec::new(0.05, 0.5, 9).unwrap();
        let s = Schedule::new(0.05, 0.5, 0.75, 0.0, 2).unwrap();
        let a = coupled_pair(&g, &spec, &s, CouplingKernel::Limit).unwrap();
        let b = coupled_pair(&g, &spec, &s, CouplingKernel::Limit).unwrap();
        assert_eq!(a.eta_eps.values(), b.eta_eps.values());
        assert_eq!(a.psi.values(), b.psi.values());
        assert!((a.psi.grid().extent() - 12.8 / s.l_eps).abs() < 1e-12);

        let g = Grid::new(2, 256, 12.8).unwrap();
        let spec = NoiseSpec::new(0.1, 0.5, 9).unwrap();
        let s = Schedule::new(0.1, 0.5, 0.75, 0.0, 2).unwrap();
        let reps = 16;
        let mut acc = 0.0;
        for r in 0..reps {
            let p = coupled_pair(&g, &spec.with_seed(100 + r), &s, CouplingKernel::Limit).unwrap();
            acc += p.psi.values().iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        }
        // The torus is a few correlation lengths wide: about 0.1 standard error here.
        let v = acc / reps as f64;
        assert!((v - 1.0).abs() < 0.3, "{v}");
    }

    #[test]
    fn finite_kernel_matches_closed_form_correlation() {
        let g = Grid::new(2, 512, 12.8).unwrap();
        let s = Schedule::new(0.05, 0.5, 0.75, 0.0, 2).unwrap();
        let want = coupling_correlation(&s, 0.05);
        // Independent quadrature of the two multipliers.
        let (a, b) = (s.t_star + 0.00125, s.l_eps.powi(2) + 0.00125);
        let mut num = 0.0;
        let (mut da, mut db) = (0.0, 0.0);
        let dk = 0.001;
        for i in 0..20000 {
            let k = (i as f64 + 0.5) * dk;
            let w = k; // radial measure in d = 2
            num += w * (-(a + b) * k * k).exp();
            da += w * (-2.0 * a * k * k).exp();
            db += w * (-2.0 * b * k * k).exp();
        }
        assert!((num / (da * db).sqrt() - want).abs() < 1e-6);

        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for r in 0..3 {
            let spec = NoiseSpec::new(0.05, 0.5, 40 + r).unwrap();
            let noise = sample_white_noise(&g, spec.seed);
            let l = coupled_pair_from_noise(&noise, &spec, &s, CouplingKernel::Limit).unwrap();
            let f = coupled_pair_from_noise(&noise, &spec, &s, CouplingKernel::Finite).unwrap();
            for (x, y) in l.psi.values().iter().zip(f.psi.values()) {
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
            }
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!((corr - want).abs() < 0.02, "{corr} vs {want}");
    }

    #[test]
    fn nodal_gradients_of_a_plane_wave() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let f = Field::from_fn(&g, 0.0, |x| (x[0] + 0.05).sin()).unwrap();
        let grads = nodal_gradients(&f);
        assert_eq!(grads.len(), 2 * 64);
        assert!(grads.iter().all(|&v| v > 0.99));
    }
}
