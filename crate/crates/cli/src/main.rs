use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use frontlab::allen_cahn::{evolve_checkpoints, SolverConfig};
use frontlab::config::KeyValues;
use frontlab::experiments::{self, ExperimentConfig, ExperimentId};
use frontlab::io::{read_field, render_pgm, render_ppm, write_atomic, write_field, Table};
use frontlab::mcf::{extract_nodal, sign_map, LevelSetConfig};
use frontlab::random::{coupled_pair_from_noise, make_eta_eps, sample_white_noise_replica, CouplingKernel, NoiseSpec};
use frontlab::schedule::Schedule;
use frontlab::wild::{enumerate_trees, moment_bound, truncation_bound, BoundInputs};
use frontlab::{row, Error, Grid};

#[derive(Parser)]
#[command(name = "frontlab", version, about = "Allen-Cahn from mollified white noise: sampling, solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Args, Clone)]
struct ScheduleArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.75)]
    alpha_bar: f64,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[arg(long, default_value_t = 2)]
    d: usize,
}

#[derive(Copy, Clone, ValueEnum)]
enum SampleKind {
    /// Unmollified white noise.
    Noise,
    Eta,
    /// Rescaled Gaussian field coupled to the same noise.
    Psi,
}

#[derive(Copy, Clone, ValueEnum)]
enum Kernel {
    Limit,
    Finite,
}

#[derive(Subcommand)]
enum Command {
    /// Print the time scales for one epsilon.
    Schedule(ScheduleArgs),
    /// Draw a noise, eta_eps or psi field.
    Sample {
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, value_enum, default_value = "eta")]
        kind: SampleKind,
        #[arg(long, default_value_t = 256)]
        points: usize,
        #[arg(long, default_value_t = 12.8)]
        extent: f64,
        #[arg(long, default_value_t = 0)]
        replica: u64,
        #[arg(long, value_enum, default_value = "limit")]
        kernel: Kernel,
        #[command(flatten)]
        common: Common,
    },
    /// Run the Allen-Cahn solver from a stored field.
    Evolve {
        input: PathBuf,
        /// Target time(s); one output per time.
        #[arg(long, value_delimiter = ',', required = true)]
        to: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        /// Graded startup for rough data at this mollifier width.
        #[arg(long)]
        rough: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Tables of the tree-moment and truncation bounds.
    Wild {
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, default_value_t = 3)]
        n_max: usize,
        /// Times as fractions of t1.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1")]
        fractions: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Level-set mean curvature flow of the sign of a stored field.
    Mcf {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sigma: Vec<f64>,
        #[arg(long)]
        dsigma: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Full experiment run: E1, E2, E3, E4 or BOUNDS.
    Experiment {
        id: ExperimentId,
        #[command(flatten)]
        common: Common,
    },
    /// Render a stored field as a PGM (or PPM with `.ppm` output).
    Render {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// Failure classes and their exit codes.
enum Failure {
    Validation(String),
    Runtime(String),
    Acceptance,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_)
            | Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::LengthMismatch { .. }
            | Error::GridMismatch => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn validation<T>(r: frontlab::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::Validation(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance) => ExitCode::from(3),
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Schedule(a) => {
            let s = schedule(&a)?;
            for (name, v) in s.rows() {
                println!("{name:<13}{v:.6}");
            }
            Ok(())
        }
        Command::Sample { schedule: a, kind, points, extent, replica, kernel, common } => {
            let s = schedule(&a)?;
            let grid = Grid::new(a.d, points, extent)?;
            let spec = NoiseSpec::new(a.epsilon, a.alpha, common.seed.unwrap_or(1))?;
            let noise = sample_white_noise_replica(&grid, spec.seed, replica);
            let f = match kind {
                SampleKind::Noise => noise,
                SampleKind::Eta => make_eta_eps(&noise, &spec)?,
                SampleKind::Psi => {
                    let k = match kernel {
                        Kernel::Limit => CouplingKernel::Limit,
                        Kernel::Finite => CouplingKernel::Finite,
                    };
                    coupled_pair_from_noise(&noise, &spec, &s, k)?.psi
                }
            };
            write_field(&f, &output(&common, "sample.afld"))?;
            Ok(())
        }
        Command::Evolve { input, to, dt, rough, common } => {
            let u0 = validation(read_field(&input))?;
            let cfg = match rough {
                Some(w) => SolverConfig::for_noise(dt, w)?,
                None => SolverConfig::new(dt)?,
            };
            let traj = evolve_checkpoints(&u0, u0.time(), &to, &cfg)?;
            let out = output(&common, "evolve");
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            for f in &traj.snapshots()[1..] {
                let path = out.join(format!("u_t{:.4}.afld", f.time()));
                write_field(f, &path)?;
                println!("{}  max|u| = {:.6}", path.display(), f.max_abs());
            }
            Ok(())
        }
        Command::Wild { schedule: a, n_max, fractions, common } => {
            let s = schedule(&a)?;
            let classes = enumerate_trees(n_max)?;
            let mut t = Table::new("wild_bounds", &["epsilon", "t", "tree", "ell", "i", "bound"]);
            for &f in &fractions {
                let time = f * s.t1;
                let inputs = BoundInputs::new(a.epsilon, a.alpha, a.d, time)?;
                for c in &classes {
                    t.push(row![a.epsilon, time, c.tree, c.leaves(), c.inner(), moment_bound(&inputs, &c.tree)]);
                }
                for n in 1..=n_max.max(1) {
                    t.push(row![a.epsilon, time, format!("u-u^{n}"), "", "", truncation_bound(&inputs, n)]);
                }
            }
            let csv = t.to_csv()?;
            match &common.out {
                Some(p) => write_atomic(p, &csv)?,
                None => print!("{}", String::from_utf8_lossy(&csv)),
            }
            Ok(())
        }
        Command::Mcf { input, sigma, dsigma, common } => {
            let f = validation(read_field(&input))?;
            let cfg = LevelSetConfig { dsigma, ..LevelSetConfig::default() };
            let ws = sign_map(&f, &sigma, &cfg)?;
            let out = output(&common, "mcf");
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            for w in &ws {
                let stem = format!("w_sigma{:.4}", w.time());
                write_field(w, &out.join(format!("{stem}.afld")))?;
                if w.grid().dim() == 2 {
                    let nodal = extract_nodal(w)?;
                    let mut buf = Vec::new();
                    nodal.write_csv(&mut buf)?;
                    write_atomic(&out.join(format!("{stem}_nodal.csv")), &buf)?;
                    println!("sigma = {:.4}: {} curve(s), length {:.4}", w.time(), nodal.len(), nodal.total_length(w.grid()));
                }
            }
            Ok(())
        }
        Command::Experiment { id, common } => {
            let mut cfg = match &common.config {
                Some(path) => {
                    let kv = validation(KeyValues::load(path))?;
                    validation(ExperimentConfig::from_key_values(&kv, Some(id)))?
                }
                None => ExperimentConfig::defaults(id),
            };
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(r) = common.replicas {
                cfg.replicas = r;
            }
            if let Some(o) = &common.out {
                cfg.output = Some(o.clone());
            }
            validation(cfg.validate())?;
            let report = experiments::run(&cfg)?;
            print!("{}", report.summary());
            println!("wall clock {:.1} s", report.wall_clock_seconds);
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Acceptance)
            }
        }
        Command::Render { input, common } => {
            let f = validation(read_field(&input))?;
            let out = output(&common, "field.pgm");
            let bytes = if out.extension().is_some_and(|e| e == "ppm") {
                render_ppm(&f, None)?
            } else {
                render_pgm(&f)?
            };
            write_atomic(&out, &bytes)?;
            Ok(())
        }
    }
}

fn schedule(a: &ScheduleArgs) -> std::result::Result<Schedule, Failure> {
    Ok(Schedule::new(a.epsilon, a.alpha, a.alpha_bar, a.kappa, a.d)?)
}

fn output(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| Path::new(default).to_path_buf())
}
