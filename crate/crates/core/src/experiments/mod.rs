//! Reproducible experiment runs: the Gaussian regime (E1), front profile (E2),
//! front formation (E3), curvature-flow propagation (E4) and the moment bounds
//! of the Wild expansion (BOUNDS).
//!
//! Every run is a pure function of its [`ExperimentConfig`]; replica `r` of
//! ladder rung `k` draws its noise from stream `(k << 32) | r` of the master
//! seed, so reports are bitwise reproducible and independent of scheduling.

mod bounds_run;
mod front;
mod gaussian;
mod propagation;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::KeyValues;
use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::io::{write_atomic, Table};
use crate::random::{CouplingKernel, NoiseSpec};
use crate::schedule::Schedule;

pub use bounds_run::run_bounds;
pub use front::{run_e2, run_e3};
pub use gaussian::run_e1;
pub use propagation::{circle_pipeline, run_e4, CircleRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    Bounds,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentId::E1 => "E1",
            ExperimentId::E2 => "E2",
            ExperimentId::E3 => "E3",
            ExperimentId::E4 => "E4",
            ExperimentId::Bounds => "BOUNDS",
        })
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E1" => Ok(ExperimentId::E1),
            "E2" => Ok(ExperimentId::E2),
            "E3" => Ok(ExperimentId::E3),
            "E4" => Ok(ExperimentId::E4),
            "BOUNDS" => Ok(ExperimentId::Bounds),
            _ => Err(Error::Config(format!("unknown experiment `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Decreasing ladder of `eps`.
    pub epsilons: Vec<f64>,
    /// Points per axis for each rung.
    pub points: Vec<usize>,
    /// Physical box size for each rung.
    pub extents: Vec<f64>,
    pub d: usize,
    pub alpha: f64,
    pub alpha_bar: f64,
    pub kappa: f64,
    pub dt: f64,
    pub replicas: usize,
    pub sigmas: Vec<f64>,
    pub delta: f64,
    pub zeta: f64,
    pub seed: u64,
    pub kernel: CouplingKernel,
    /// Largest inner-node count for the Wild expansion.
    pub n_max: usize,
    /// E2: times `t` at which `u(t_star + t)` is compared with `Phi(t, Psi)`.
    pub offsets: Vec<f64>,
    /// E4: level-set grid (points per axis on the rescaled box).
    pub mcf_points: usize,
    /// E4: radius of the seeded circle at `sigma = 1`.
    pub circle_radius: f64,
    pub circle_epsilon: f64,
    pub output: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "experiment",
    "epsilons",
    "points",
    "extents",
    "d",
    "alpha",
    "alpha_bar",
    "kappa",
    "dt",
    "replicas",
    "sigmas",
    "delta",
    "zeta",
    "seed",
    "kernel",
    "n_max",
    "offsets",
    "mcf_points",
    "circle_radius",
    "circle_epsilon",
    "output",
];

impl ExperimentConfig {
    /// Desk-scale defaults for one experiment.
    pub fn defaults(experiment: ExperimentId) -> Self {
        let mut cfg = Self {
            experiment,
            epsilons: vec![0.1, 0.05, 0.02],
            points: vec![256, 512, 1024],
            extents: vec![12.8, 12.8, 10.24],
            d: 2,
            alpha: 0.5,
            alpha_bar: 0.75,
            kappa: 0.0,
            dt: 0.05,
            replicas: 4,
            sigmas: vec![],
            delta: 0.2,
            zeta: 0.2,
            seed: 1,
            kernel: CouplingKernel::Limit,
            n_max: 2,
            offsets: vec![-2.0, 0.0, 2.0],
            mcf_points: 128,
            circle_radius: 4.0,
            circle_epsilon: 0.05,
            output: None,
        };
        match experiment {
            ExperimentId::E1 => {
                cfg.replicas = 100;
                cfg.sigmas = vec![0.5];
            }
            ExperimentId::E2 => {}
            ExperimentId::E3 => {
                cfg.kappa = 0.2;
                cfg.replicas = 20;
            }
            ExperimentId::E4 => {
                cfg.sigmas = vec![1.05, 1.5, 2.0];
            }
            ExperimentId::Bounds => {
                cfg.epsilons = vec![0.1, 0.05];
                cfg.points = vec![128, 256];
                cfg.extents = vec![6.4, 6.4];
                cfg.replicas = 200;
                cfg.n_max = 3;
                cfg.dt = 0.01;
            }
        }
        cfg
    }

    /// Defaults for `experiment` (or the file's `experiment` key) overridden
    /// by every key present.
    pub fn from_key_values(kv: &KeyValues, experiment: Option<ExperimentId>) -> Result<Self> {
        if let Some(bad) = kv.keys().find(|k| !KEYS.contains(k)) {
            return Err(Error::Config(format!("unknown key `{bad}`")));
        }
        let id = match (experiment, kv.get::<ExperimentId>("experiment")?) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config is for {b}, asked to run {a}")));
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("no experiment given".into())),
        };
        let mut c = Self::defaults(id);
        macro_rules! take {
            ($field:ident, $key:literal) => {
                if let Some(v) = kv.get($key)? {
                    c.$field = v;
                }
            };
        }
        macro_rules! take_list {
            ($field:ident, $key:literal) => {
                if let Some(v) = kv.get_list($key)? {
                    c.$field = v;
                }
            };
        }
        take_list!(epsilons, "epsilons");
        take_list!(points, "points");
        take_list!(extents, "extents");
        take!(d, "d");
        take!(alpha, "alpha");
        take!(alpha_bar, "alpha_bar");
        take!(kappa, "kappa");
        take!(dt, "dt");
        take!(replicas, "replicas");
        take_list!(sigmas, "sigmas");
        take!(delta, "delta");
        take!(zeta, "zeta");
        take!(seed, "seed");
        take!(n_max, "n_max");
        take_list!(offsets, "offsets");
        take!(mcf_points, "mcf_points");
        take!(circle_radius, "circle_radius");
        take!(circle_epsilon, "circle_epsilon");
        if let Some(k) = kv.get_str("kernel") {
            c.kernel = match k.to_ascii_lowercase().as_str() {
                "limit" => CouplingKernel::Limit,
                "finite" => CouplingKernel::Finite,
                _ => return Err(Error::Config(format!("unknown kernel `{k}`"))),
            };
        }
        if let Some(o) = kv.get_str("output") {
            c.output = Some(PathBuf::from(o));
        }
        Ok(c)
    }

    pub fn schedule(&self, eps: f64) -> Result<Schedule> {
        Schedule::new(eps, self.alpha, self.alpha_bar, self.kappa, self.d)
    }

    pub fn grid(&self, rung: usize) -> Result<Grid> {
        Grid::new(self.d, self.points[rung], self.extents[rung])
    }

    pub fn noise(&self, rung: usize) -> Result<NoiseSpec> {
        NoiseSpec::new(self.epsilons[rung], self.alpha, self.seed)
    }

    /// Check every precondition before any compute.
    pub fn validate(&self) -> Result<()> {
        let k = self.epsilons.len();
        if k == 0 {
            return Err(invalid("epsilons", "ladder is empty"));
        }
        if self.points.len() != k || self.extents.len() != k {
            return Err(invalid("points", "need one points and one extents entry per epsilon"));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("epsilons", "ladder must be strictly decreasing"));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas", "need at least one replica"));
        }
        for rung in 0..k {
            let grid = self.grid(rung)?;
            let spec = self.noise(rung)?;
            self.schedule(spec.epsilon)?;
            if spec.mollifier_width < 2.0 * grid.spacing() {
                return Err(invalid(
                    "points",
                    format!("eps = {} is not resolved: spacing {} exceeds eps/2", spec.epsilon, grid.spacing()),
                ));
            }
        }
        crate::allen_cahn::SolverConfig::new(self.dt)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.zeta > 0.0) {
            return Err(invalid("zeta", "must be positive"));
        }
        match self.experiment {
            ExperimentId::E1 => {
                if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
                    return Err(invalid("sigmas", "E1 needs sigma values in (0, 1)"));
                }
            }
            ExperimentId::E2 => {
                if self.offsets.is_empty() {
                    return Err(invalid("offsets", "E2 needs at least one time offset"));
                }
                for rung in 0..k {
                    let s = self.schedule(self.epsilons[rung])?;
                    if self.offsets.iter().any(|t| s.t_star + t < 0.0) {
                        return Err(invalid("offsets", "t_star + t must be >= 0"));
                    }
                }
            }
            ExperimentId::E3 => {
                if !(self.kappa > 0.0 && self.kappa < 0.25) {
                    return Err(invalid("kappa", format!("E3 needs kappa in (0, 1/4), got {}", self.kappa)));
                }
                crate::wild::enumerate_trees(self.n_max)?;
            }
            ExperimentId::E4 => {
                if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s > 1.0 && *s <= 1.0 / self.delta)) {
                    return Err(invalid("sigmas", "E4 needs sigma values in (1, 1/delta]"));
                }
                if self.sigmas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("sigmas", "must be strictly increasing"));
                }
                if self.d != 2 {
                    return Err(invalid("d", "level-set runs are two-dimensional"));
                }
                for rung in 0..k {
                    if self.points[rung] % self.mcf_points != 0 {
                        return Err(invalid("mcf_points", "must divide points on every rung"));
                    }
                }
                if !(self.circle_radius > 0.0) {
                    return Err(invalid("circle_radius", "must be positive"));
                }
                let s = self.schedule(self.circle_epsilon)?;
                let rung = self.epsilons.iter().position(|&e| e == self.circle_epsilon).unwrap_or(k - 1);
                let r_init = (self.circle_radius.powi(2) + 2.0 * s.t_star / s.t_eps).sqrt();
                let half = self.extents[rung] / s.l_eps;
                if r_init + 1.0 > half {
                    return Err(invalid(
                        "circle_radius",
                        format!("seeded circle of rescaled radius {r_init:.3} does not fit in half-width {half:.3}"),
                    ));
                }
            }
            ExperimentId::Bounds => {
                if self.n_max > 4 {
                    return Err(invalid("n_max", "BOUNDS supports N <= 4"));
                }
                if self.replicas < 100 {
                    return Err(invalid("replicas", "BOUNDS needs at least 100 replicas"));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let json = serde_json::to_vec(&c).expect("config serialises");
        hex(&Sha256::digest(&json))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentId,
    pub config_hash: String,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub tables: Vec<Table>,
    pub criteria: Vec<CriterionResult>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment,
            config_hash: cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
            tables: Vec::new(),
            criteria: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn criterion(&self, name: &str) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.name == name)
    }

    /// Hash of every reported number (tables and criteria), for determinism
    /// checks. Wall-clock time is excluded.
    pub fn numbers_digest(&self) -> String {
        let json = serde_json::to_vec(&(&self.tables, &self.criteria)).expect("report serialises");
        hex(&Sha256::digest(&json))
    }

    /// `report.json` plus one CSV per table, all written atomically.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        write_atomic(&dir.join("report.json"), &json)?;
        for t in &self.tables {
            write_atomic(&dir.join(format!("{}.csv", t.name)), &t.to_csv()?)?;
        }
        Ok(())
    }

    /// One line per criterion.
    pub fn summary(&self) -> String {
        let mut s = format!("{} (config {})\n", self.experiment, &self.config_hash[..12]);
        for c in &self.criteria {
            s += &format!("  [{}] {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        for n in &self.notes {
            s += &format!("  note: {n}\n");
        }
        s
    }
}

/// Validate, dispatch, time and (if an output directory is set) persist.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = match cfg.experiment {
        ExperimentId::E1 => run_e1(cfg)?,
        ExperimentId::E2 => run_e2(cfg)?,
        ExperimentId::E3 => run_e3(cfg)?,
        ExperimentId::E4 => run_e4(cfg)?,
        ExperimentId::Bounds => run_bounds(cfg)?,
    };
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = &cfg.output {
        report.write(dir)?;
    }
    Ok(report)
}

/// Noise stream of replica `r` on rung `k`.
pub fn stream(rung: usize, replica: usize) -> u64 {
    ((rung as u64) << 32) | replica as u64
}

/// Run `f` for every replica, in parallel when enabled, results in order.
pub(crate) fn map_replicas<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Every `stride`-th point along each axis of a 2-d field.
pub fn subsample(f: &Field, stride: usize) -> Result<Field> {
    let g = f.grid();
    let n = g.points_per_axis();
    if stride == 0 || n % stride != 0 || g.dim() != 2 {
        return Err(invalid("stride", format!("{stride} does not divide {n} (d = 2 only)")));
    }
    let m = n / stride;
    let grid = Grid::new(2, m, g.extent())?;
    let v = f.values();
    // Coarse index j sits at fine index n/2 + (j - m/2) stride so that the
    // origin is shared.
    let fine = |j: usize| ((n / 2) as i64 + (j as i64 - (m / 2) as i64) * stride as i64).rem_euclid(n as i64) as usize;
    let values = (0..m * m).map(|p| v[fine(p / m) * n + fine(p % m)]).collect();
    Field::new(grid, values, f.time())
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Number of consecutive rungs on which `values` strictly decreases, and
/// whether the last is below the first.
pub(crate) fn trend(values: &[f64]) -> (usize, bool) {
    let steps = values.windows(2).filter(|w| w[1] < w[0]).count();
    let overall = values.len() >= 2 && values[values.len() - 1] < values[0];
    (steps, overall)
}
