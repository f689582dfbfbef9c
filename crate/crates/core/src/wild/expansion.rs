//! Tree fields `X^tau`, the truncated sum `u^N` and its remainder `R^N`.
//!
//! `X^•(t) = P¹_t eta` and, for `tau = [t1, t2, t3]`,
//! `X^tau(t) = -int_0^t P¹_{t-s} (X^{t1} X^{t2} X^{t3})(s) ds`.
//! The integral is advanced node by node with the exponential trapezoid rule:
//! `F` is interpolated linearly over each step and the heat weight is
//! integrated exactly per Fourier mode, so with `z = (1 - |k|^2) h`
//! `X(s + h) = e^z X(s) - h (phi2(z) F(s) + (phi1(z) - phi2(z)) F(s + h))`.
//! Second order, unequal steps allowed, and stable on the stiff high modes
//! that products of rough fields carry.

use std::collections::HashMap;

use num_complex::Complex64;

use super::trees::{enumerate_trees, CanonicalTreeClass, TernaryTree};
use crate::error::{invalid, Error, Result};
use crate::flows::phi_bar_forward;
use crate::grid::Field;
use crate::schedule::Schedule;
use crate::spectral::{heat_plus_one, Spectral};

/// Fields `X^tau` for a set of trees, stored at the requested times.
#[derive(Debug, Clone)]
pub struct WildExpansion {
    /// Every tree computed, children before parents.
    trees: Vec<TernaryTree>,
    index: HashMap<TernaryTree, usize>,
    times: Vec<f64>,
    /// `fields[tree][time]`.
    fields: Vec<Vec<Field>>,
}

/// Growth factor of the graded startup steps.
const STARTUP_GROWTH: f64 = 1.25;

/// Integration nodes: `0`, then steps of at most `dt` landing on every time.
/// With `first < dt` the steps start at `first` and grow geometrically up to
/// `dt`, which resolves the initial layer of rough data.
fn nodes(times: &[f64], dt: f64, first: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut h = first.min(dt);
    for &t in times {
        loop {
            let last = *out.last().expect("non-empty");
            if t <= last {
                break;
            }
            if h >= dt {
                let k = ((t - last) / dt - 1e-9).ceil().max(1.0) as usize;
                for j in 1..=k {
                    out.push(if j == k { t } else { last + (t - last) * j as f64 / k as f64 });
                }
                break;
            }
            let rem = t - last;
            out.push(if rem <= h { t } else if rem < 2.0 * h { last + 0.5 * rem } else { last + h });
            h = (h * STARTUP_GROWTH).min(dt);
        }
    }
    out
}

/// `phi1(z) = (e^z - 1)/z` and `phi2(z) = (e^z - 1 - z)/z^2`, with series
/// near zero.
fn phi12(z: f64) -> (f64, f64) {
    if z.abs() < 1e-3 {
        let phi1 = 1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
        let phi2 = 0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0)));
        (phi1, phi2)
    } else {
        let em1 = z.exp_m1();
        (em1 / z, (em1 - z) / (z * z))
    }
}

/// Per-mode step weights for one step length, rebuilt when `h` changes.
#[derive(Default)]
struct EtdWeights {
    h: f64,
    e: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl EtdWeights {
    fn update(&mut self, sp: &Spectral, h: f64) {
        if h == self.h && !self.e.is_empty() {
            return;
        }
        self.h = h;
        self.e.clear();
        self.a.clear();
        self.b.clear();
        for &k2 in sp.k2() {
            let z = (1.0 - k2) * h;
            let (p1, p2) = phi12(z);
            self.e.push(z.exp());
            self.a.push(h * p2);
            self.b.push(h * (p1 - p2));
        }
    }
}

impl WildExpansion {
    /// Compute `X^tau` for `trees` and all their subtrees. Trees are used as
    /// given: ordered trees are not identified with their permutations.
    pub fn compute(eta: &Field, trees: &[TernaryTree], times: &[f64], dt: f64) -> Result<Self> {
        Self::compute_with_startup(eta, trees, times, dt, dt)
    }

    /// As [`WildExpansion::compute`], with graded steps from `first_step`.
    /// For `eta_eps` a first step of `0.1 eps^2` matches the solver's startup.
    pub fn compute_with_startup(
        eta: &Field,
        trees: &[TernaryTree],
        times: &[f64],
        dt: f64,
        first_step: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(first_step > 0.0) {
            return Err(invalid("first_step", format!("must be positive, got {first_step}")));
        }
        if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(invalid("t_grid", "times must be finite and >= 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("t_grid", "times must be strictly increasing"));
        }
        let mut all: Vec<TernaryTree> = Vec::new();
        for t in trees {
            for s in t.subtrees() {
                if !all.contains(&s) {
                    all.push(s);
                }
            }
        }
        all.sort_by_key(|t| t.inner());
        let index: HashMap<TernaryTree, usize> =
            all.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let kids: Vec<Option<[usize; 3]>> = all
            .iter()
            .map(|t| t.children().map(|c| [index[&c[0]], index[&c[1]], index[&c[2]]]))
            .collect();

        let grid = eta.grid().clone();
        let m = grid.len();
        let sp = Spectral::for_grid(&grid);
        let mut scratch: Vec<Complex64> = Vec::new();
        let mut x: Vec<Vec<f64>> = all
            .iter()
            .map(|t| if *t == TernaryTree::Leaf { eta.values().to_vec() } else { vec![0.0; m] })
            .collect();
        let zero = vec![Complex64::default(); sp.spectrum_len()];
        let mut xhat: Vec<Vec<Complex64>> = vec![zero.clone(); all.len()];
        let mut fhat: Vec<Vec<Complex64>> = vec![zero; all.len()];
        let mut fields: Vec<Vec<Field>> = vec![Vec::with_capacity(times.len()); all.len()];
        let store = |fields: &mut Vec<Vec<Field>>, x: &[Vec<f64>], s: f64| -> Result<()> {
            for (slot, v) in fields.iter_mut().zip(x) {
                slot.push(Field::new(grid.clone(), v.clone(), s)?);
            }
            Ok(())
        };

        let leaf = index.get(&TernaryTree::Leaf).copied();
        let s_nodes = nodes(times, dt, first_step);
        let mut next_time = 0;
        if times.first() == Some(&0.0) {
            store(&mut fields, &x, 0.0)?;
            next_time = 1;
        }
        let product = |x: &[Vec<f64>], [a, b, c]: [usize; 3]| -> Vec<f64> {
            (0..m).map(|p| x[a][p] * x[b][p] * x[c][p]).collect()
        };
        for (i, k) in kids.iter().enumerate() {
            if let Some(k) = *k {
                fhat[i] = sp.forward(&product(&x, k));
            }
        }
        let mut weights = EtdWeights::default();
        let mut fnew: Vec<Complex64> = Vec::new();
        for w in s_nodes.windows(2) {
            let (s0, s1) = (w[0], w[1]);
            weights.update(&sp, s1 - s0);
            if let Some(l) = leaf {
                let mut v = eta.values().to_vec();
                sp.heat_values(&mut v, s1, &mut scratch);
                let es = s1.exp();
                v.iter_mut().for_each(|y| *y *= es);
                x[l] = v;
            }
            for i in 0..all.len() {
                let Some(k) = kids[i] else { continue };
                sp.forward_into(&product(&x, k), &mut fnew);
                let EtdWeights { e, a, b, .. } = &weights;
                for (p, xh) in xhat[i].iter_mut().enumerate() {
                    *xh = e[p] * *xh - (a[p] * fhat[i][p] + b[p] * fnew[p]);
                }
                std::mem::swap(&mut fhat[i], &mut fnew);
                scratch.clear();
                scratch.extend_from_slice(&xhat[i]);
                sp.inverse_real(&mut scratch, &mut x[i]);
            }
            if next_time < times.len() && s1 == times[next_time] {
                store(&mut fields, &x, s1)?;
                next_time += 1;
            }
        }
        Ok(Self {
            trees: all,
            index,
            times: times.to_vec(),
            fields,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn trees(&self) -> &[TernaryTree] {
        &self.trees
    }

    /// `X^tau` at every stored time.
    pub fn trajectory(&self, tree: &TernaryTree) -> Result<&[Field]> {
        self.index
            .get(tree)
            .map(|&i| self.fields[i].as_slice())
            .ok_or_else(|| Error::MissingTrajectory(format!("no trajectory for {tree}")))
    }

    /// `sum_k w_k X^{tree_k}` at every stored time.
    pub fn weighted_sum(&self, terms: &[(TernaryTree, f64)]) -> Result<Vec<Field>> {
        let grid = self.fields[0][0].grid().clone();
        let mut out: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; self.times.len()];
        for (tree, w) in terms {
            for (acc, f) in out.iter_mut().zip(self.trajectory(tree)?) {
                for (a, v) in acc.iter_mut().zip(f.values()) {
                    *a += w * v;
                }
            }
        }
        out.into_iter()
            .zip(&self.times)
            .map(|(v, &t)| Field::new(grid.clone(), v, t))
            .collect()
    }
}

/// `X^tau` for one class at the requested times.
pub fn compute_x_tau(
    class: &CanonicalTreeClass,
    eta: &Field,
    times: &[f64],
    dt: f64,
) -> Result<Vec<Field>> {
    let exp = WildExpansion::compute(eta, std::slice::from_ref(&class.tree), times, dt)?;
    Ok(exp.trajectory(&class.tree)?.to_vec())
}

/// Expansion over every class with at most `n` inner nodes.
pub fn expansion_up_to(n: usize, eta: &Field, times: &[f64], dt: f64) -> Result<(Vec<CanonicalTreeClass>, WildExpansion)> {
    let classes = enumerate_trees(n)?;
    let trees: Vec<TernaryTree> = classes.iter().map(|c| c.tree.clone()).collect();
    let exp = WildExpansion::compute(eta, &trees, times, dt)?;
    Ok((classes, exp))
}

fn class_terms(classes: &[CanonicalTreeClass], pick: impl Fn(usize) -> bool) -> Vec<(TernaryTree, f64)> {
    classes
        .iter()
        .filter(|c| pick(c.inner()))
        .map(|c| (c.tree.clone(), c.multiplicity as f64))
        .collect()
}

/// [`expansion_up_to`] for mollified noise of width `epsilon`: graded steps
/// from `0.1 eps^2`, as in the solver's startup.
pub fn expansion_for_noise(
    n: usize,
    eta: &Field,
    times: &[f64],
    dt: f64,
    epsilon: f64,
) -> Result<(Vec<CanonicalTreeClass>, WildExpansion)> {
    let classes = enumerate_trees(n)?;
    let trees: Vec<TernaryTree> = classes.iter().map(|c| c.tree.clone()).collect();
    let exp = WildExpansion::compute_with_startup(eta, &trees, times, dt, 0.1 * epsilon * epsilon)?;
    Ok((classes, exp))
}

/// `u^N` from an expansion that contains every class up to `n`.
pub fn truncated_sum(n: usize, classes: &[CanonicalTreeClass], exp: &WildExpansion) -> Result<Vec<Field>> {
    exp.weighted_sum(&class_terms(classes, |i| i <= n))
}

/// `u^N = sum over trees with at most N inner nodes of X^tau`.
pub fn wild_sum(n: usize, eta: &Field, times: &[f64], dt: f64) -> Result<Vec<Field>> {
    let (classes, exp) = expansion_up_to(n, eta, times, dt)?;
    truncated_sum(n, &classes, &exp)
}

/// `R^N = sum X^{t1} X^{t2} X^{t3}` over `t_i` with at most `N` inner nodes
/// such that `[t1, t2, t3]` has more than `N`.
pub fn remainder_rn(n: usize, classes: &[CanonicalTreeClass], exp: &WildExpansion) -> Result<Vec<Field>> {
    let levels: Vec<Vec<Field>> = (0..=n)
        .map(|j| exp.weighted_sum(&class_terms(classes, |i| i == j)))
        .collect::<Result<_>>()?;
    let times = exp.times();
    let grid = levels[0][0].grid().clone();
    let mut out = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let mut acc = vec![0.0; grid.len()];
        for a in 0..=n {
            for b in 0..=n {
                for c in 0..=n {
                    if a + b + c < n {
                        continue;
                    }
                    let (sa, sb, sc) = (levels[a][k].values(), levels[b][k].values(), levels[c][k].values());
                    for (p, y) in acc.iter_mut().enumerate() {
                        *y += sa[p] * sb[p] * sc[p];
                    }
                }
            }
        }
        out.push(Field::new(grid.clone(), acc, t)?);
    }
    Ok(out)
}

/// `w^{N,kappa}(t) = phi_bar(t - t2^kappa, e^{-(t - t2^kappa)} P¹_{t - t1} u^N(t1))`.
pub fn w_approx(schedule: &Schedule, u_n_at_t1: &Field, t: f64) -> Result<Field> {
    if !(t >= schedule.t2_kappa) {
        return Err(invalid(
            "t",
            format!("w is defined from t2^kappa = {} on, got {t}", schedule.t2_kappa),
        ));
    }
    let v = heat_plus_one(u_n_at_t1, t - schedule.t1)?;
    let s = t - schedule.t2_kappa;
    let decay = (-s).exp();
    Ok(v.map(|y| phi_bar_forward(s, decay * y))?.with_time(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::random::sample_white_noise;
    use crate::spectral::{gaussian_filter, laplacian};
    use crate::wild::trees::ordered_trees;

    fn smooth_eta(seed: u64) -> Field {
        let g = Grid::new(2, 32, 6.4).unwrap();
        gaussian_filter(&sample_white_noise(&g, seed), 0.05, 0.2).unwrap()
    }

    #[test]
    fn node_grid_hits_every_time() {
        let n = nodes(&[0.0, 0.25, 1.0], 0.1, 0.1);
        assert_eq!(n[0], 0.0);
        assert!(n.contains(&0.25) && *n.last().unwrap() == 1.0);
        assert!(n.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-15));
        let g = nodes(&[0.003, 0.5], 0.1, 1e-3);
        assert!(g.contains(&0.003) && *g.last().unwrap() == 0.5);
        assert!((g[1] - 1e-3).abs() < 1e-15);
        let steps: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(steps.iter().all(|&h| h > 0.0 && h <= 0.1 + 1e-15));
        assert!(steps.windows(2).all(|w| w[1] <= STARTUP_GROWTH * w[0] + 1e-12 || w[1] <= 0.1));
    }

    #[test]
    fn initial_values() {
        let eta = smooth_eta(1);
        let (classes, exp) = expansion_up_to(2, &eta, &[0.0, 0.5], 0.05).unwrap();
        assert_eq!(exp.trajectory(&TernaryTree::Leaf).unwrap()[0].values(), eta.values());
        for c in classes.iter().skip(1) {
            assert_eq!(exp.trajectory(&c.tree).unwrap()[0].max_abs(), 0.0);
        }
        let other = TernaryTree::node(TernaryTree::Leaf, TernaryTree::cherry(), TernaryTree::Leaf);
        assert!(matches!(exp.trajectory(&other), Err(Error::MissingTrajectory(_))));
    }

    #[test]
    fn constant_data_matches_the_scalar_integrals() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let a = 0.1;
        let eta = Field::constant(&g, a, 0.0);
        let (classes, exp) = expansion_up_to(1, &eta, &[1.0], 5e-4).unwrap();
        let x = exp.trajectory(&TernaryTree::cherry()).unwrap()[0].values()[0];
        let e = 1.0f64.exp();
        let exact = -e * a.powi(3) * (e * e - 1.0) / 2.0;
        assert!((exact + 0.008_683_627_5).abs() < 1e-10);
        assert!((x - exact).abs() < 1e-8, "{x} vs {exact}");

        let u1 = truncated_sum(1, &classes, &exp).unwrap()[0].values()[0];
        assert!((u1 - (e * a + exact)).abs() < 1e-8);
        let u0 = truncated_sum(0, &classes, &exp).unwrap()[0].values()[0];
        assert!((u0 - e * a).abs() < 1e-14);
    }

    #[test]
    fn constant_data_remainder() {
        // R^1 = 3 X•^2 X^[•••] + 3 X• (X^[•••])^2 + (X^[•••])^3.
        let g = Grid::new(2, 8, 1.0).unwrap();
        let a = 0.2;
        let eta = Field::constant(&g, a, 0.0);
        let (classes, exp) = expansion_up_to(1, &eta, &[0.7], 5e-4).unwrap();
        let r = remainder_rn(1, &classes, &exp).unwrap()[0].values()[0];
        let t: f64 = 0.7;
        let x0 = t.exp() * a;
        let x1 = -t.exp() * a.powi(3) * ((2.0 * t).exp() - 1.0) / 2.0;
        let exact = 3.0 * x0 * x0 * x1 + 3.0 * x0 * x1 * x1 + x1.powi(3);
        assert!((r - exact).abs() < 1e-8, "{r} vs {exact}");
    }

    #[test]
    fn canonical_sum_equals_ordered_sum() {
        let eta = smooth_eta(3).scale(4.0);
        let times = [0.3, 0.6];
        let canon = wild_sum(2, &eta, &times, 0.02).unwrap();
        let ordered: Vec<TernaryTree> = (0..=2).flat_map(ordered_trees).collect();
        assert_eq!(ordered.len(), 5);
        let exp = WildExpansion::compute(&eta, &ordered, &times, 0.02).unwrap();
        let terms: Vec<(TernaryTree, f64)> = ordered.iter().map(|t| (t.clone(), 1.0)).collect();
        let brute = exp.weighted_sum(&terms).unwrap();
        for (a, b) in canon.iter().zip(&brute) {
            assert!(a.sup_distance(b).unwrap() <= 1e-12);
        }
    }

    fn defect(dt: f64) -> f64 {
        let eta = smooth_eta(5).scale(8.0);
        let t = 0.4;
        let times = [t - dt, t, t + dt];
        let (classes, exp) = expansion_up_to(2, &eta, &times, dt).unwrap();
        let u = truncated_sum(2, &classes, &exp).unwrap();
        let r = remainder_rn(2, &classes, &exp).unwrap();
        let lap = laplacian(&u[1]);
        let mut worst: f64 = 0.0;
        for p in 0..u[1].values().len() {
            let du = (u[2].values()[p] - u[0].values()[p]) / (2.0 * dt);
            let v = u[1].values()[p];
            let res = du - lap.values()[p] - v + v * v * v - r[1].values()[p];
            worst = worst.max(res.abs());
        }
        worst
    }

    #[test]
    fn defect_identity_is_second_order() {
        let (a, b) = (defect(0.02), defect(0.01));
        assert!(a < 1e-3, "{a}");
        assert!(a / b > 3.5, "{a} {b}");
    }

    #[test]
    fn w_approx_matches_closed_form() {
        let s = Schedule::new(0.05, 0.5, 0.75, 0.1, 2).unwrap();
        let u = smooth_eta(7).scale(20.0);
        let at = w_approx(&s, &u, s.t2_kappa).unwrap();
        let direct = heat_plus_one(&u, s.t2_kappa - s.t1).unwrap();
        assert!(at.sup_distance(&direct).unwrap() <= 1e-14);
        for t in [s.t2_kappa + 0.3, s.t_star] {
            let w = w_approx(&s, &u, t).unwrap();
            let v = heat_plus_one(&u, t - s.t1).unwrap();
            let q = 1.0 - (-2.0 * (t - s.t2_kappa)).exp();
            let closed = v.map(|y| y / (1.0 + q * y * y).sqrt()).unwrap();
            assert!(w.sup_distance(&closed).unwrap() <= 1e-12);
        }
        assert!(w_approx(&s, &u, s.t2_kappa - 0.1).is_err());
        let pos = Field::constant(u.grid(), 0.3, 0.0);
        assert!((w_approx(&s, &pos, s.t2_kappa + 40.0).unwrap().min() - 1.0).abs() < 1e-12);
    }
}
