//! E2 (front profile) and E3 (front formation) under the explicit coupling.

use super::gaussian::fmt_list;
use super::{map_replicas, median, stream, trend, CriterionResult, ExperimentConfig, ExperimentReport};
use crate::allen_cahn::{evolve_checkpoints, SolverConfig};
use crate::error::Result;
use crate::flows::phi;
use crate::grid::{Field, Grid};
use crate::io::Table;
use crate::mcf::{distance_field, extract_nodal, k_delta1_mask};
use crate::random::{coupled_pair_from_noise, sample_white_noise_replica, CoupledPair};
use crate::row;
use crate::wild::expansion::{expansion_for_noise, truncated_sum, w_approx};

/// Longest step used for the Duhamel integrals behind `u^N`.
const WILD_DT: f64 = 0.01;

pub(crate) fn replica_pair(cfg: &ExperimentConfig, rung: usize, replica: usize) -> Result<CoupledPair> {
    let grid = cfg.grid(rung)?;
    let spec = cfg.noise(rung)?;
    let schedule = cfg.schedule(spec.epsilon)?;
    let noise = sample_white_noise_replica(&grid, spec.seed, stream(rung, replica));
    coupled_pair_from_noise(&noise, &spec, &schedule, cfg.kernel)
}

/// A physical snapshot read on the rescaled grid.
pub(crate) fn on_rescaled(u: &Field, rescaled: &Grid) -> Result<Field> {
    Field::new(rescaled.clone(), u.values().to_vec(), u.time())
}

/// Largest `|a - b|` over points where `mask` holds (0 for an empty mask).
pub(crate) fn masked_sup(a: &Field, b: &Field, mask: &[bool]) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((x, y), _)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Masks used for one `psi`: `K_delta^1`, the window `|x| <= 1/delta`, and
/// the part of the window within `delta` of the nodal set.
pub(crate) struct FrontMasks {
    pub k1: Vec<bool>,
    pub window: Vec<bool>,
    pub near: Vec<bool>,
}

pub(crate) fn front_masks(psi: &Field, delta: f64) -> Result<FrontMasks> {
    let g = psi.grid();
    let nodal = extract_nodal(psi)?;
    let k1 = k_delta1_mask(g, &nodal, delta)?;
    let dist = distance_field(g, &nodal, delta)?;
    let window: Vec<bool> = (0..g.len())
        .map(|p| g.position(p).iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 / delta)
        .collect();
    let near = window.iter().zip(&dist).map(|(&w, &d)| w && d < delta).collect();
    Ok(FrontMasks { k1, window, near })
}

pub fn run_e2(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg);
    let mut table = Table::new(
        "e2_errors",
        &["epsilon", "seed", "replica", "t", "masked_sup", "near_interface_sup", "window_sup", "masked_fraction"],
    );
    let mut summary = Table::new("e2_summary", &["epsilon", "seed", "replica", "t", "mean_masked_sup", "mean_near_interface_sup"]);
    // means[offset][rung]
    let mut means = vec![Vec::new(); cfg.offsets.len()];
    for (rung, &eps) in cfg.epsilons.iter().enumerate() {
        let schedule = cfg.schedule(eps)?;
        let solver = SolverConfig::for_noise(cfg.dt, eps)?;
        let times: Vec<f64> = cfg.offsets.iter().map(|t| schedule.t_star + t).collect();
        let order = sorted_order(&times);
        let rows: Vec<Vec<[f64; 4]>> = map_replicas(cfg.replicas, |r| {
            let pair = replica_pair(cfg, rung, r)?;
            let masks = front_masks(&pair.psi, cfg.delta)?;
            let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
            let traj = evolve_checkpoints(&pair.eta_eps, 0.0, &sorted, &solver)?;
            let mut out = vec![[0.0; 4]; times.len()];
            for (slot, &i) in order.iter().enumerate() {
                let u = on_rescaled(&traj.snapshots()[slot + 1], pair.psi.grid())?;
                let t = cfg.offsets[i];
                let target = pair.psi.map(|p| phi(t, p))?;
                let frac = masks.k1.iter().filter(|&&m| m).count() as f64 / masks.k1.len() as f64;
                out[i] = [
                    masked_sup(&u, &target, &masks.k1),
                    masked_sup(&u, &target, &masks.near),
                    masked_sup(&u, &target, &masks.window),
                    frac,
                ];
            }
            Ok(out)
        })?;
        for (i, &t) in cfg.offsets.iter().enumerate() {
            for (r, res) in rows.iter().enumerate() {
                let e = res[i];
                table.push(row![eps, cfg.seed, r, t, e[0], e[1], e[2], e[3]]);
            }
            let n = rows.len() as f64;
            let m = rows.iter().map(|x| x[i][0]).sum::<f64>() / n;
            let near = rows.iter().map(|x| x[i][1]).sum::<f64>() / n;
            means[i].push(m);
            summary.push(row![eps, cfg.seed, "all", t, m, near]);
        }
    }
    let k = cfg.epsilons.len();
    let monotone = means.iter().filter(|m| trend(m).0 == k - 1).count();
    let need = (2 * cfg.offsets.len()).div_ceil(3);
    report.criteria.push(CriterionResult::new(
        "masked error decreases along the ladder",
        k >= 2 && monotone >= need,
        format!(
            "{monotone}/{} time points monotone; per t: {}",
            cfg.offsets.len(),
            means.iter().map(|m| fmt_list(m)).collect::<Vec<_>>().join(" ")
        ),
    ));
    report.tables.push(summary);
    report.tables.push(table);
    Ok(report)
}

fn sorted_order(times: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..times.len()).collect();
    idx.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    idx
}

/// Per-replica E3 measurements.
struct FormationResult {
    /// Masked sup of `|u(t_star^kappa) - sgn psi|`.
    sgn_sup: f64,
    /// Pointwise masked errors, pooled later for the median.
    sgn_errors: Vec<f64>,
    /// Masked sup of `|u(t_star) - sgn psi|`.
    sgn_sup_at_star: f64,
    /// Masked sup of `|u - w|` at `t_star` and `t_star^kappa`.
    w_sup_at_star: f64,
    w_sup: f64,
}

pub fn run_e3(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg);
    let mut table = Table::new(
        "e3_errors",
        &[
            "epsilon", "seed", "replica", "masked_sup_sgn", "masked_median_sgn", "exceeds_zeta",
            "masked_sup_sgn_at_t_star", "masked_sup_w_at_t_star", "masked_sup_w",
        ],
    );
    let mut summary = Table::new(
        "e3_summary",
        &[
            "epsilon", "seed", "replica", "t_star_kappa", "mean_masked_sup", "median_masked_error",
            "exceedance_fraction", "mean_sgn_at_t_star", "mean_w_at_t_star",
        ],
    );
    let mut mean_sup = Vec::new();
    let mut medians = Vec::new();
    let mut exceed = Vec::new();
    let mut w_sharper = Vec::new();
    for (rung, &eps) in cfg.epsilons.iter().enumerate() {
        let schedule = cfg.schedule(eps)?;
        let solver = SolverConfig::for_noise(cfg.dt, eps)?;
        let times = [schedule.t_star, schedule.t_star_kappa];
        let results: Vec<FormationResult> = map_replicas(cfg.replicas, |r| {
            let pair = replica_pair(cfg, rung, r)?;
            let masks = front_masks(&pair.psi, cfg.delta)?;
            let sgn = crate::mcf::sign_field(&pair.psi);
            let traj = evolve_checkpoints(&pair.eta_eps, 0.0, &times, &solver)?;
            let rg = pair.psi.grid();
            let u_star = on_rescaled(&traj.snapshots()[1], rg)?;
            let u_k = on_rescaled(&traj.snapshots()[2], rg)?;
            let sgn_errors: Vec<f64> = u_k
                .values()
                .iter()
                .zip(sgn.values())
                .zip(&masks.k1)
                .filter(|(_, &m)| m)
                .map(|((a, b), _)| (a - b).abs())
                .collect();

            let (classes, exp) = expansion_for_noise(cfg.n_max, &pair.eta_eps, &[schedule.t1], WILD_DT.min(cfg.dt), eps)?;
            let u_n = truncated_sum(cfg.n_max, &classes, &exp)?.remove(0);
            let w_star = on_rescaled(&w_approx(&schedule, &u_n, schedule.t_star)?, rg)?;
            let w_k = on_rescaled(&w_approx(&schedule, &u_n, schedule.t_star_kappa)?, rg)?;
            Ok(FormationResult {
                sgn_sup: sgn_errors.iter().cloned().fold(0.0, f64::max),
                sgn_errors,
                sgn_sup_at_star: masked_sup(&u_star, &sgn, &masks.k1),
                w_sup_at_star: masked_sup(&u_star, &w_star, &masks.k1),
                w_sup: masked_sup(&u_k, &w_k, &masks.k1),
            })
        })?;
        let n = results.len() as f64;
        let mut pooled = Vec::new();
        for (r, res) in results.iter().enumerate() {
            let mut own = res.sgn_errors.clone();
            table.push(row![
                eps,
                cfg.seed,
                r,
                res.sgn_sup,
                median(&mut own),
                res.sgn_sup > cfg.zeta,
                res.sgn_sup_at_star,
                res.w_sup_at_star,
                res.w_sup
            ]);
            pooled.extend_from_slice(&res.sgn_errors);
        }
        let m = results.iter().map(|r| r.sgn_sup).sum::<f64>() / n;
        let med = median(&mut pooled);
        let ex = results.iter().filter(|r| r.sgn_sup > cfg.zeta).count() as f64 / n;
        let sgn_star = results.iter().map(|r| r.sgn_sup_at_star).sum::<f64>() / n;
        let w_star = results.iter().map(|r| r.w_sup_at_star).sum::<f64>() / n;
        summary.push(row![eps, cfg.seed, "all", schedule.t_star_kappa, m, med, ex, sgn_star, w_star]);
        mean_sup.push(m);
        medians.push(med);
        exceed.push(ex);
        w_sharper.push(w_star < sgn_star);
    }
    let k = cfg.epsilons.len();
    let last = cfg.epsilons[k - 1];
    let (steps, overall) = trend(&mean_sup);
    report.criteria.push(CriterionResult::new(
        "masked error decreases along the ladder",
        k >= 2 && steps == k - 1,
        format!("mean masked sup {} ({steps}/{} steps, overall {overall})", fmt_list(&mean_sup), k - 1),
    ));
    report.criteria.push(CriterionResult::new(
        &format!("median masked error <= 0.2 at eps = {last}"),
        medians[k - 1] <= 0.2,
        format!("medians {}", fmt_list(&medians)),
    ));
    report.criteria.push(CriterionResult::new(
        "exceedance fraction decreases",
        k >= 2 && exceed[k - 1] < exceed[0],
        format!("fraction of replicas with masked sup > {}: {}", cfg.zeta, fmt_list(&exceed)),
    ));
    report.criteria.push(CriterionResult::new(
        "w approximant sharper than sgn at t_star",
        w_sharper.iter().all(|&b| b),
        format!("per rung {w_sharper:?}"),
    ));
    report.tables.push(summary);
    report.tables.push(table);
    Ok(report)
}
