//! Strang splitting for `du/dt = Δu + u - u^3` on the periodic grid.
//!
//! One step is `R(dt/2) H(dt) R(dt/2)`: `R(s)` is the exact pointwise flow
//! `u -> phi_bar(s, u)` of `u' = u - u^3` and `H(t)` is the heat semigroup.
//! Both substeps are exact, so only the splitting error `O(dt^2)` remains.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flows::apriori_bound;
use crate::grid::{Field, Grid};
use crate::schedule::Schedule;
use crate::spectral::Spectral;

/// Largest accepted splitting step.
pub const MAX_DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    /// Slack allowed above the a-priori envelope before a run is aborted.
    pub monitor_tolerance: f64,
    /// If set, steps start at this size and grow geometrically (by
    /// `1 + growth`) up to `dt`. Rough initial data need this: the first
    /// reaction substep otherwise acts on unsmoothed values.
    pub first_step: Option<f64>,
    pub growth: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::new(0.01).expect("default step is valid")
    }
}

impl SolverConfig {
    /// Config with step `dt` and tolerance `1e-6 + 2 dt^2`.
    pub fn new(dt: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            monitor_tolerance: 1e-6 + 2.0 * dt * dt,
            first_step: None,
            growth: 0.2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_startup(mut self, first_step: f64) -> Self {
        self.first_step = Some(first_step);
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.monitor_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(invalid("dt", format!("must lie in (0, {MAX_DT}], got {}", self.dt)));
        }
        if !(self.monitor_tolerance >= 0.0) {
            return Err(invalid("monitor_tolerance", "must be >= 0"));
        }
        if let Some(h) = self.first_step {
            if !(h > 0.0 && h <= self.dt) {
                return Err(invalid("first_step", format!("must lie in (0, dt], got {h}")));
            }
        }
        if !(self.growth > 0.0 && self.growth.is_finite()) {
            return Err(invalid("growth", "must be positive"));
        }
        Ok(())
    }

    /// Startup grading suited to `eta_eps` initial data: first step `eps^2 / 10`.
    pub fn for_noise(dt: f64, epsilon: f64) -> Result<Self> {
        let cfg = Self::new(dt)?.with_startup((0.1 * epsilon * epsilon).min(dt));
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reaction flow `phi_bar(s, .)` applied in place.
fn react(values: &mut [f64], s: f64) {
    let es = s.exp();
    let a = (2.0 * s).exp_m1();
    for v in values.iter_mut() {
        let u = *v;
        *v = es * u / (1.0 + a * u * u).sqrt();
    }
}

/// Reusable buffers for stepping one field.
struct Stepper {
    spectral: std::sync::Arc<Spectral>,
    scratch: Vec<Complex64>,
}

impl Stepper {
    fn new(grid: &Grid) -> Self {
        Self {
            spectral: Spectral::for_grid(grid),
            scratch: Vec::new(),
        }
    }

    fn step(&mut self, values: &mut [f64], dt: f64) {
        react(values, 0.5 * dt);
        self.spectral.heat_values(values, dt, &mut self.scratch);
        react(values, 0.5 * dt);
    }
}

/// One Strang step `R(dt/2) H(dt) R(dt/2)`.
pub fn step_strang(u: &Field, dt: f64) -> Result<Field> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let mut values = u.values().to_vec();
    Stepper::new(u.grid()).step(&mut values, dt);
    Field::new(u.grid().clone(), values, u.time() + dt)
}

fn check_monitor(values: &[f64], step: usize, elapsed: f64, time: f64, tol: f64) -> Result<()> {
    let mut max_abs: f64 = 0.0;
    for (index, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        max_abs = max_abs.max(v.abs());
    }
    let bound = apriori_bound(elapsed)?;
    if max_abs > bound + tol {
        return Err(Error::BoundViolation {
            step,
            time,
            max_abs,
            bound,
        });
    }
    Ok(())
}

/// Evolve from `t_from` to `t_to`. The a-priori bound, measured from
/// `t_from`, is checked after every step.
pub fn evolve(u0: &Field, t_from: f64, t_to: f64, cfg: &SolverConfig) -> Result<Field> {
    let traj = evolve_checkpoints(u0, t_from, &[t_to], cfg)?;
    Ok(traj.snapshots.into_iter().last().expect("one checkpoint"))
}

/// Evolve and keep snapshots at each checkpoint (sorted, all `>= t_from`).
/// The initial field is always kept as the first snapshot.
pub fn evolve_checkpoints(
    u0: &Field,
    t_from: f64,
    checkpoints: &[f64],
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !t_from.is_finite() {
        return Err(invalid("t_from", "must be finite"));
    }
    let mut times = checkpoints.to_vec();
    times.sort_by(f64::total_cmp);
    if let Some(&t) = times.first() {
        if !(t >= t_from) || !times.last().unwrap().is_finite() {
            return Err(invalid("t_to", format!("checkpoint {t} precedes t_from = {t_from}")));
        }
    }
    let mut snapshots = vec![u0.clone().with_time(t_from)];
    let mut values = u0.values().to_vec();
    let mut stepper = Stepper::new(u0.grid());
    let mut t = t_from;
    let mut step = 0usize;
    let mut h = cfg.first_step.unwrap_or(cfg.dt);
    for &target in &times {
        while target - t > 1e-12 * target.abs().max(1.0) {
            let dt = h.min(target - t);
            stepper.step(&mut values, dt);
            t += dt;
            step += 1;
            check_monitor(&values, step, t - t_from, t, cfg.monitor_tolerance)?;
            if cfg.first_step.is_some() {
                h = (h * (1.0 + cfg.growth)).min(cfg.dt);
            }
        }
        t = target;
        if target > t_from || snapshots.len() > 1 {
            snapshots.push(Field::new(u0.grid().clone(), values.clone(), target)?);
        }
    }
    Ok(Trajectory { snapshots })
}

/// Time-ordered snapshots of one solution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    snapshots: Vec<Field>,
}

impl Trajectory {
    pub fn new(mut snapshots: Vec<Field>) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::MissingTrajectory("no snapshots".into()))?;
        let grid = first.grid().clone();
        if snapshots.iter().any(|f| f.grid() != &grid) {
            return Err(Error::GridMismatch);
        }
        snapshots.sort_by(|a, b| a.time().total_cmp(&b.time()));
        Ok(Self { snapshots })
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn start(&self) -> f64 {
        self.snapshots[0].time()
    }

    pub fn end(&self) -> f64 {
        self.snapshots[self.snapshots.len() - 1].time()
    }

    pub fn last(&self) -> &Field {
        &self.snapshots[self.snapshots.len() - 1]
    }

    /// Field at time `t`, linearly interpolated between bracketing
    /// snapshots. Negative times read the solution at time zero.
    pub fn at(&self, t: f64) -> Result<Field> {
        let t = if t < 0.0 && self.start() == 0.0 { 0.0 } else { t };
        let tol = 1e-9 * t.abs().max(1.0);
        if t < self.start() - tol || t > self.end() + tol {
            return Err(Error::OutsideTrajectory {
                time: t,
                start: self.start(),
                end: self.end(),
            });
        }
        if let Some(f) = self.snapshots.iter().find(|f| (f.time() - t).abs() <= tol) {
            return Ok(f.clone());
        }
        let k = self.snapshots.iter().position(|f| f.time() > t).expect("t < end");
        let (a, b) = (&self.snapshots[k - 1], &self.snapshots[k]);
        let w = (t - a.time()) / (b.time() - a.time());
        Ok(a.axpby(1.0 - w, b, w)?.with_time(t))
    }
}

/// `U_eps(sigma, x) = max(e^{(1 - sigma) T_eps}, 1) u(sigma T_eps + tau_star, x L_eps)`
/// at rescaled points `x`.
pub fn rescaled_view(
    traj: &Trajectory,
    sigma: f64,
    schedule: &Schedule,
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let f = traj.at(schedule.physical_time(sigma))?;
    let pre = schedule.rescale_prefactor(sigma);
    let l = schedule.l_eps;
    Ok(points
        .iter()
        .map(|x| {
            let phys: Vec<f64> = x.iter().map(|xi| xi * l).collect();
            pre * f.interpolate(&phys)
        })
        .collect())
}

/// [`rescaled_view`] on the whole lattice: the same values read on the
/// rescaled grid (extent divided by `L_eps`).
pub fn rescaled_field(traj: &Trajectory, sigma: f64, schedule: &Schedule) -> Result<Field> {
    let f = traj.at(schedule.physical_time(sigma))?;
    rescale_snapshot(&f, sigma, schedule)
}

/// Rescale one snapshot taken at physical time `sigma T_eps + tau_star`.
pub fn rescale_snapshot(f: &Field, sigma: f64, schedule: &Schedule) -> Result<Field> {
    let g = f.grid();
    let grid = Grid::new(g.dim(), g.points_per_axis(), g.extent() / schedule.l_eps)?;
    let pre = schedule.rescale_prefactor(sigma);
    Field::new(grid, f.values().iter().map(|v| pre * v).collect(), sigma)
}
