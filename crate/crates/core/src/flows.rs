//! Closed-form flows of the scalar ODE `u' = u - u^3`.
//!
//! [`phi`] is the trajectory normalised at `t = -infinity` (`e^{-t} phi(t, u) -> u`),
//! [`phi_bar`] the one normalised at `t = 0`. Both saturate to `sgn(u)`.
//! For `t > 354` the term `e^{-2t}` underflows to zero and `phi` returns
//! `sgn(u)` exactly, which is the correct limit.

use crate::error::{invalid, Result};

/// `phi(t, u) = u / sqrt(e^{-2t} + u^2)`.
pub fn phi(t: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    u / ((-2.0 * t).exp() + u * u).sqrt()
}

/// Largest `|u|` for which `phi_bar(t, u)` is defined when `t < 0`.
pub fn phi_bar_domain(t: f64) -> f64 {
    if t >= 0.0 {
        f64::INFINITY
    } else {
        1.0 / (-(2.0 * t).exp_m1()).sqrt()
    }
}

/// `phi_bar(t, u) = e^t u / sqrt(1 + (e^{2t} - 1) u^2)`, the flow with
/// `phi_bar(0, u) = u`.
pub fn phi_bar(t: f64, u: f64) -> Result<f64> {
    let q = 1.0 + (2.0 * t).exp_m1() * u * u;
    if !(q > 0.0) {
        return Err(invalid(
            "u",
            format!("phi_bar({t}, {u}) is outside the domain |u| < {}", phi_bar_domain(t)),
        ));
    }
    Ok(phi_bar_unchecked(t, u))
}

/// [`phi_bar`] for `t >= 0`, where it is defined everywhere.
#[inline]
pub fn phi_bar_forward(t: f64, u: f64) -> f64 {
    debug_assert!(t >= 0.0);
    phi_bar_unchecked(t, u)
}

#[inline]
fn phi_bar_unchecked(t: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let e2 = (2.0 * t).exp_m1();
    if !e2.is_finite() {
        return u.signum();
    }
    // e^t u / sqrt(1 + (e^{2t}-1) u^2), rearranged to stay finite for large t.
    let et = t.exp();
    if et.is_finite() {
        et * u / (1.0 + e2 * u * u).sqrt()
    } else {
        u.signum()
    }
}

/// First and second `u`-derivatives of [`phi_bar`] at `(t, u)`, `t >= 0`.
pub fn phi_bar_derivs(t: f64, u: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let a = (2.0 * t).exp_m1();
    let q = 1.0 + u * u * a;
    let d1 = t.exp() * q.powf(-1.5);
    let d2 = -3.0 * u * a * d1 / q;
    Ok((d1, d2))
}

/// The a-priori envelope `e^t / sqrt(e^{2t} - 1)` bounding every solution of
/// the Allen–Cahn equation at time `t > 0`.
pub fn apriori_bound(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", format!("bound diverges at t = {t}; need t > 0")));
    }
    // e^t / sqrt(e^{2t} - 1) = 1 / sqrt(1 - e^{-2t})
    Ok(1.0 / (-(-2.0 * t).exp_m1()).sqrt())
}

/// Travelling wave `tanh(x / sqrt 2)`, the profile with `q'' + q - q^3 = 0`.
pub fn travelling_wave(x: f64) -> f64 {
    (x / std::f64::consts::SQRT_2).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phi_examples() {
        assert!((phi(0.0, 1.0) - 0.707_106_781_2).abs() < 1e-10);
        for t in [-5.0, 0.0, 3.0, 400.0] {
            assert_eq!(phi(t, 0.0), 0.0);
        }
        // 30-digit reference: 0.999999988549146738...
        assert!((phi(10.0, 0.3) - 0.999_999_988_549_146_7).abs() < 1e-15);
        assert!((phi(10.0, 0.3) - 1.0).abs() <= 1e-8 + 1e-9 * 2.0);
        assert_eq!(phi(400.0, -0.2), -1.0);
    }

    #[test]
    fn phi_bar_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = rng.random_range(0.0..3.0);
            let t = rng.random_range(0.0..3.0);
            let u = rng.random_range(-2.0..2.0);
            let lhs = phi_bar(s + t, u).unwrap();
            let rhs = phi_bar(t, phi_bar(s, u).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12, "{s} {t} {u}");
        }
    }

    #[test]
    fn phi_bar_initial_condition_and_domain() {
        assert_eq!(phi_bar(0.0, 0.37).unwrap(), 0.37);
        assert!(phi_bar(-1.0, 2.0).is_err());
        assert!(phi_bar(-1.0, 0.5).is_ok());
    }

    #[test]
    fn phi_is_limit_of_phi_bar() {
        for &(t, u) in &[(0.0, 0.3), (1.0, -0.8), (-1.0, 2.0), (2.5, 0.05)] {
            let s = 20.0;
            let approx = phi_bar(t + s, (-s as f64).exp() * u).unwrap();
            assert!((approx - phi(t, u)).abs() <= 1e-8);
        }
    }

    #[test]
    fn derivative_examples() {
        for u in [-1.5, 0.0, 0.4] {
            let (d1, d2) = phi_bar_derivs(0.0, u).unwrap();
            assert!((d1 - 1.0).abs() < 1e-15 && d2.abs() < 1e-15);
        }
        let (d1, d2) = phi_bar_derivs(1.3, 0.0).unwrap();
        assert!((d1 - 1.3f64.exp()).abs() < 1e-14 && d2 == 0.0);

        let (t, u, h) = (1.0, 0.5, 1e-5);
        let fd = (phi_bar(t, u + h).unwrap() - phi_bar(t, u - h).unwrap()) / (2.0 * h);
        let (d1, d2) = phi_bar_derivs(t, u).unwrap();
        assert!(((fd - d1) / d1).abs() <= 1e-8);
        let fd2 = (phi_bar(t, u + 1e-4).unwrap() - 2.0 * phi_bar(t, u).unwrap()
            + phi_bar(t, u - 1e-4).unwrap())
            / 1e-8;
        assert!(((fd2 - d2) / d2).abs() <= 1e-5);
        let a = (2.0f64 * t).exp() - 1.0;
        assert!((d2 / d1 + 3.0 * u * a / (1.0 + u * u * a)).abs() < 1e-13);
        assert!(phi_bar_derivs(-0.1, 0.0).is_err());
    }

    #[test]
    fn second_derivative_is_bounded_by_three_e_2t() {
        let mut worst: f64 = 0.0;
        for i in 0..=200 {
            let t = 6.0 * i as f64 / 200.0;
            for j in 0..=400 {
                let u = -4.0 + 8.0 * j as f64 / 400.0;
                let (_, d2) = phi_bar_derivs(t, u).unwrap();
                worst = worst.max(d2.abs() / (2.0 * t).exp());
            }
        }
        assert!(worst <= 3.0, "sup |d2| e^-2t = {worst}");
    }

    #[test]
    fn apriori_bound_values() {
        // 30-digit references.
        assert!((apriori_bound(1.0).unwrap() - 1.075_415_102_530_025_7).abs() < 1e-14);
        assert!((apriori_bound(0.1).unwrap() - 2.348_756_174_260_537).abs() < 1e-13);
        assert!(apriori_bound(10.0).unwrap() - 1.0 <= 1.1e-9);
        assert!(apriori_bound(0.0).is_err());
        assert!(apriori_bound(-1.0).is_err());
        assert!(apriori_bound(2.0).unwrap() < apriori_bound(1.0).unwrap());
    }

    #[test]
    fn apriori_bound_is_the_blow_down_limit_of_phi_bar() {
        for t in [0.05, 0.5, 2.0] {
            let lim = phi_bar(t, 1e12).unwrap();
            assert!((lim - apriori_bound(t).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn travelling_wave_solves_profile_equation() {
        // q = tanh(x/sqrt2): q' = (1 - q^2)/sqrt2, q'' = -q (1 - q^2).
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let q = travelling_wave(x);
            let h = 1e-4;
            let q2 = (travelling_wave(x + h) - 2.0 * q + travelling_wave(x - h)) / (h * h);
            assert!((q2 + q - q * q * q).abs() < 1e-6);
            assert!((-q * (1.0 - q * q) + q - q.powi(3)).abs() < 1e-15);
        }
        // plain tanh does not solve it: residual is -tanh sech^2.
        let x: f64 = 0.7;
        let r = -2.0 * x.tanh() / x.cosh().powi(2) + x.tanh() - x.tanh().powi(3);
        assert!((r + x.tanh() / x.cosh().powi(2)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn flow_property_oddness_and_ode(
            t1 in -3.0f64..3.0, dt in 0.0f64..4.0, u in -3.0f64..3.0,
        ) {
            let t2 = t1 + dt;
            let lhs = phi(t2, u);
            let rhs = phi_bar(t2 - t1, phi(t1, u)).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
            prop_assert_eq!(phi(t1, -u), -phi(t1, u));
            prop_assert_eq!(phi_bar(dt, -u).unwrap(), -phi_bar(dt, u).unwrap());
            let h = 1e-4;
            let p = phi(t1, u);
            let resid = (phi(t1 + h, u) - phi(t1 - h, u)) / (2.0 * h) - (p - p * p * p);
            prop_assert!(resid.abs() <= 1e-7);
            prop_assert!(phi_bar(dt, u).unwrap().abs() <= u.abs().max(1.0) + 1e-15);
        }

        #[test]
        fn phi_bar_is_monotone(t in 0.0f64..5.0, u in -3.0f64..3.0, du in 1e-6f64..1.0) {
            prop_assert!(phi_bar(t, u + du).unwrap() > phi_bar(t, u).unwrap());
        }
    }
}
