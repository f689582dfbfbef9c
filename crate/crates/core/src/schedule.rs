//! Closed-form time and length scales attached to a noise level `epsilon`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Every epsilon-dependent time and length used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub epsilon: f64,
    pub alpha: f64,
    pub alpha_bar: f64,
    pub kappa: f64,
    pub d: usize,
    /// `(d/2 - alpha) ln(1/eps)`: the time at which the linear growth
    /// compensates the initial smallness.
    pub t_eps: f64,
    /// `sqrt(t_eps)`: diffusive length over `t_eps`.
    pub l_eps: f64,
    /// `(d/4) ln(4 pi (d - 2 alpha))`.
    pub c_const: f64,
    pub tau_star: f64,
    pub t_star: f64,
    pub t1: f64,
    pub t2: f64,
    pub t2_kappa: f64,
    pub t_star_kappa: f64,
}

impl Schedule {
    pub fn new(epsilon: f64, alpha: f64, alpha_bar: f64, kappa: f64, d: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < (-1.0f64).exp()) {
            return Err(invalid("epsilon", format!("must lie in (0, 1/e), got {epsilon}")));
        }
        if !(alpha > 0.0 && alpha < alpha_bar && alpha_bar < 1.0) {
            return Err(invalid(
                "alpha",
                format!("need 0 < alpha < alpha_bar < 1, got alpha = {alpha}, alpha_bar = {alpha_bar}"),
            ));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa", format!("must be >= 0, got {kappa}")));
        }
        if d < 2 {
            return Err(invalid("d", format!("must be >= 2, got {d}")));
        }
        let df = d as f64;
        if df - 2.0 * alpha <= 0.0 {
            return Err(invalid("alpha", "d - 2 alpha must be positive"));
        }
        let log_inv = (1.0 / epsilon).ln();
        let loglog = log_inv.ln();
        let t_eps = (df / 2.0 - alpha) * log_inv;
        let c_const = df / 4.0 * (4.0 * PI * (df - 2.0 * alpha)).ln();
        let tau_star = df / 4.0 * loglog + c_const;
        let t_star = t_eps + tau_star;
        let t1 = (alpha_bar - alpha) * log_inv;
        let t2 = t_eps - 0.5 * loglog;
        let t2_kappa = t_eps - (kappa + 0.5) * loglog;
        let t_star_kappa = t_star + kappa * loglog;
        if t2 <= t1 {
            return Err(invalid(
                "epsilon",
                format!("t2 = {t2:.6} does not exceed t1 = {t1:.6}; epsilon too large for these exponents"),
            ));
        }
        if t2 >= t_star {
            return Err(invalid("alpha", "ordering t2 < t_star violated"));
        }
        Ok(Self {
            epsilon,
            alpha,
            alpha_bar,
            kappa,
            d,
            t_eps,
            l_eps: t_eps.sqrt(),
            c_const,
            tau_star,
            t_star,
            t1,
            t2,
            t2_kappa,
            t_star_kappa,
        })
    }

    /// `ln ln (1/eps)`.
    pub fn loglog(&self) -> f64 {
        (1.0 / self.epsilon).ln().ln()
    }

    /// Physical time `sigma T_eps + tau_star` behind the rescaled time `sigma`.
    pub fn physical_time(&self, sigma: f64) -> f64 {
        sigma * self.t_eps + self.tau_star
    }

    /// Prefactor `max(e^{(1 - sigma) T_eps}, 1)` of the rescaled process.
    pub fn rescale_prefactor(&self, sigma: f64) -> f64 {
        ((1.0 - sigma) * self.t_eps).exp().max(1.0)
    }

    /// Rows `(name, value)` in a fixed order, for tables and reports.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("epsilon", self.epsilon),
            ("alpha", self.alpha),
            ("alpha_bar", self.alpha_bar),
            ("kappa", self.kappa),
            ("d", self.d as f64),
            ("T_eps", self.t_eps),
            ("L_eps", self.l_eps),
            ("c", self.c_const),
            ("tau_star", self.tau_star),
            ("t_star", self.t_star),
            ("t1", self.t1),
            ("t2", self.t2),
            ("t2_kappa", self.t2_kappa),
            ("t_star_kappa", self.t_star_kappa),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        // 30-digit reference evaluation of the closed forms.
        let s = Schedule::new(0.01, 0.5, 0.75, 0.0, 2).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 5e-7;
        assert!(close(s.t_eps, 2.302585));
        assert!(close(s.l_eps, 1.517427));
        assert!(close(s.c_const, 1.265512));
        assert!(close(s.tau_star, 2.029102));
        assert!(close(s.t_star, 4.331687));
        assert!(close(s.t1, 1.151293));
        assert!(close(s.t2, 1.538995));
        assert_eq!(s.t_star_kappa, s.t_star);
        assert_eq!(s.t2_kappa, s.t2);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Schedule::new(0.5, 0.5, 0.75, 0.0, 2).is_err());
        assert!(Schedule::new(0.01, 0.8, 0.75, 0.0, 2).is_err());
        assert!(Schedule::new(0.01, 0.5, 0.75, -0.1, 2).is_err());
        assert!(Schedule::new(0.01, 0.5, 0.75, 0.0, 1).is_err());
        // alpha -> 1: T_eps -> 0 and t2 <= t1 is rejected.
        assert!(Schedule::new(0.01, 0.97, 0.99, 0.0, 2).is_err());
    }

    proptest! {
        #[test]
        fn ordering_and_monotonicity(
            eps in 1e-6f64..0.3,
            alpha in 0.05f64..0.6,
            gap in 0.01f64..0.3,
        ) {
            let alpha_bar = (alpha + gap).min(0.99);
            if let Ok(s) = Schedule::new(eps, alpha, alpha_bar, 0.0, 2) {
                prop_assert!(0.0 < s.t1 && s.t1 < s.t2 && s.t2 < s.t_star);
                prop_assert!((s.l_eps * s.l_eps - s.t_eps).abs() <= 1e-15 * s.t_eps.max(1.0) * 4.0);
                if let Ok(smaller) = Schedule::new(eps * 0.5, alpha, alpha_bar, 0.0, 2) {
                    prop_assert!(smaller.t_star > s.t_star);
                }
            }
        }
    }
}
