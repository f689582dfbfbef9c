//! E1: covariance of the rescaled solution in the Gaussian regime.

use std::f64::consts::PI;

use super::{map_replicas, stream, trend, CriterionResult, ExperimentConfig, ExperimentReport};
use crate::allen_cahn::{evolve_checkpoints, rescale_snapshot, SolverConfig};
use crate::error::Result;
use crate::io::Table;
use crate::random::{make_eta_eps, sample_white_noise_replica, CovarianceTarget};
use crate::row;
use crate::schedule::Schedule;
use crate::stats::{covariance_about, mean_and_se, Estimate};

/// Lag distances as fractions of `sqrt(8 sigma)`.
const LAG_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Covariance of the linearised field `e^t P_t eta_eps`, rescaled, at
/// rescaled distance `r`: what the solution would show if it were still
/// Gaussian at this `eps`.
pub fn linear_prediction(s: &Schedule, sigma: f64, r: f64) -> f64 {
    let d = s.d as f64;
    let t = s.physical_time(sigma);
    let a = 2.0 * t + s.epsilon * s.epsilon;
    let pre = s.rescale_prefactor(sigma);
    pre * pre * (2.0 * t).exp() * s.epsilon.powf(d - 2.0 * s.alpha) * (4.0 * PI * a).powf(-d / 2.0)
        * (-(r * s.l_eps).powi(2) / (4.0 * a)).exp()
}

pub fn run_e1(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg);
    let mut per_replica = Table::new(
        "e1_replicas",
        &["epsilon", "seed", "replica", "sigma", "lag", "r", "covariance"],
    );
    let mut summary = Table::new(
        "e1_covariance",
        &[
            "epsilon", "seed", "replica", "sigma", "lag", "r", "estimate", "std_error", "target", "z",
            "deviation", "linear_prediction",
        ],
    );
    // deviations[sigma][rung][lag]
    let mut deviations = vec![vec![Vec::new(); cfg.epsilons.len()]; cfg.sigmas.len()];
    let mut z_last = vec![Vec::new(); cfg.sigmas.len()];

    for (rung, &eps) in cfg.epsilons.iter().enumerate() {
        let schedule = cfg.schedule(eps)?;
        let grid = cfg.grid(rung)?;
        let spec = cfg.noise(rung)?;
        let solver = SolverConfig::for_noise(cfg.dt, eps)?;
        let hr = grid.spacing() / schedule.l_eps;
        let lags: Vec<Vec<i64>> = cfg
            .sigmas
            .iter()
            .map(|&s| {
                LAG_FRACTIONS
                    .iter()
                    .map(|f| (f * (8.0 * s).sqrt() / hr).round() as i64)
                    .collect()
            })
            .collect();
        let times: Vec<f64> = cfg.sigmas.iter().map(|&s| schedule.physical_time(s)).collect();

        // covs[replica][sigma][lag]
        let covs: Vec<Vec<Vec<f64>>> = map_replicas(cfg.replicas, |r| {
            let noise = sample_white_noise_replica(&grid, spec.seed, stream(rung, r));
            let eta = make_eta_eps(&noise, &spec)?;
            let traj = evolve_checkpoints(&eta, 0.0, &times, &solver)?;
            let mut out = Vec::with_capacity(cfg.sigmas.len());
            for (k, &sigma) in cfg.sigmas.iter().enumerate() {
                let u = rescale_snapshot(&traj.snapshots()[k + 1], sigma, &schedule)?;
                out.push(axis_averaged(&u, &lags[k])?);
            }
            Ok(out)
        })?;

        for (k, &sigma) in cfg.sigmas.iter().enumerate() {
            let target = CovarianceTarget::new(sigma, cfg.d)?;
            for (j, &lag) in lags[k].iter().enumerate() {
                let r = lag as f64 * hr;
                for (rep, c) in covs.iter().enumerate() {
                    per_replica.push(row![eps, cfg.seed, rep, sigma, lag, r, c[k][j]]);
                }
                let est = if cfg.replicas >= 2 {
                    mean_and_se(&covs.iter().map(|c| c[k][j]).collect::<Vec<_>>())
                } else {
                    Estimate {
                        estimate: covs[0][k][j],
                        std_error: f64::NAN,
                    }
                };
                let tv = target.covariance(r);
                let dev = (est.estimate - tv).abs();
                let z = est.z_score(tv);
                deviations[k][rung].push(dev);
                if rung + 1 == cfg.epsilons.len() {
                    z_last[k].push(z);
                }
                summary.push(row![
                    eps,
                    cfg.seed,
                    "all",
                    sigma,
                    lag,
                    r,
                    est.estimate,
                    est.std_error,
                    tv,
                    z,
                    dev,
                    linear_prediction(&schedule, sigma, r)
                ]);
            }
        }
        report.notes.push(format!(
            "eps = {eps}: T = {:.4}, t_star = {:.4}, lag spacing {hr:.5} (rescaled)",
            schedule.t_eps, schedule.t_star
        ));
    }

    let last = *cfg.epsilons.last().expect("validated");
    for (k, &sigma) in cfg.sigmas.iter().enumerate() {
        let zs = &z_last[k];
        let within = zs.iter().filter(|z| **z <= 3.0).count();
        report.criteria.push(CriterionResult::new(
            &format!("covariance within 3 SE at eps = {last}, sigma = {sigma}"),
            within == zs.len(),
            format!("{within}/{} lags; z = {}", zs.len(), fmt_list(zs)),
        ));
        let first = &deviations[k][0];
        let lastd = &deviations[k][cfg.epsilons.len() - 1];
        let better = first.iter().zip(lastd).filter(|(a, b)| b < a).count();
        report.criteria.push(CriterionResult::new(
            &format!("deviation decreases along the ladder, sigma = {sigma}"),
            cfg.epsilons.len() >= 2 && better >= 4.min(first.len()),
            format!("{better}/{} lags improve from eps = {} to {last}", first.len(), cfg.epsilons[0]),
        ));
        let maxdev: Vec<f64> = deviations[k].iter().map(|v| v.iter().cloned().fold(0.0, f64::max)).collect();
        let (steps, _) = trend(&maxdev);
        report.notes.push(format!(
            "sigma = {sigma}: max deviation per rung {} ({steps} decreasing steps)",
            fmt_list(&maxdev)
        ));
    }
    report.tables.push(summary);
    report.tables.push(per_replica);
    Ok(report)
}

/// Covariance about zero at each lag, averaged over the axes.
fn axis_averaged(u: &crate::grid::Field, lags: &[i64]) -> Result<Vec<f64>> {
    let d = u.grid().dim();
    let mut all = Vec::with_capacity(lags.len() * d);
    for &l in lags {
        for axis in 0..d {
            let mut v = vec![0i64; d];
            v[axis] = l;
            all.push(v);
        }
    }
    let est = covariance_about(std::slice::from_ref(u), &all, 0.0)?;
    Ok(est
        .chunks(d)
        .map(|c| c.iter().map(|(_, e)| e.estimate).sum::<f64>() / d as f64)
        .collect())
}

pub(crate) fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentId;

    #[test]
    fn linear_prediction_closed_form() {
        // Lag-zero variance equals T / t at sigma < 1 (d = 2, any eps).
        let s = Schedule::new(0.02, 0.5, 0.75, 0.0, 2).unwrap();
        let t = s.physical_time(0.5);
        let v = linear_prediction(&s, 0.5, 0.0);
        let expected = s.t_eps / (t + 0.5 * s.epsilon * s.epsilon);
        assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
    }

    #[test]
    fn tiny_run_is_deterministic() {
        let mut cfg = ExperimentConfig::defaults(ExperimentId::E1);
        cfg.epsilons = vec![0.1, 0.05];
        cfg.points = vec![64, 64];
        cfg.extents = vec![3.2, 1.6];
        cfg.replicas = 2;
        cfg.validate().unwrap();
        let a = run_e1(&cfg).unwrap();
        let b = run_e1(&cfg).unwrap();
        assert_eq!(a.numbers_digest(), b.numbers_digest());
        let t = a.table("e1_covariance").unwrap();
        assert_eq!(t.rows.len(), 2 * 5);
        assert_eq!(a.table("e1_replicas").unwrap().rows.len(), 2 * 5 * 2);
        assert_eq!(a.criteria.len(), 2);
    }
}
