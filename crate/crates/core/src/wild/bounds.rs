//! Closed-form moment and error bounds, evaluated with implied constant 1.

use serde::{Deserialize, Serialize};

use super::trees::TernaryTree;
use crate::error::{invalid, Result};

/// `Gamma_a(t) = int_0^t max(s, 1)^{-a} ds`.
pub fn gamma_a(a: f64, t: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(invalid("a", format!("must be positive, got {a}")));
    }
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    Ok(if t <= 1.0 {
        t
    } else if a == 1.0 {
        1.0 + t.ln()
    } else {
        1.0 + (t.powf(1.0 - a) - 1.0) / (1.0 - a)
    })
}

/// Parameters shared by every bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub epsilon: f64,
    pub alpha: f64,
    pub d: usize,
    pub t: f64,
}

impl BoundInputs {
    pub fn new(epsilon: f64, alpha: f64, d: usize, t: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid("epsilon", format!("must lie in (0, 1), got {epsilon}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        if d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("must be >= 0, got {t}")));
        }
        Ok(Self { epsilon, alpha, d, t })
    }

    fn half_d(&self) -> f64 {
        self.d as f64 / 2.0
    }

    /// `max(t, eps^2)`.
    fn t_floor(&self) -> f64 {
        self.t.max(self.epsilon * self.epsilon)
    }

    /// `e^t eps^{d/2 - alpha}`.
    fn trunk_amplitude(&self) -> f64 {
        self.t.exp() * self.epsilon.powf(self.half_d() - self.alpha)
    }

    fn gamma(&self) -> f64 {
        gamma_a(self.half_d(), self.t / (self.epsilon * self.epsilon)).expect("validated inputs")
    }

    /// `e^t eps^{1 - alpha} Gamma_{d/2}^{1/2}(t / eps^2)`, the factor gained
    /// per extra pair of leaves.
    pub fn growth_factor(&self) -> f64 {
        self.t.exp() * self.epsilon.powf(1.0 - self.alpha) * self.gamma().sqrt()
    }
}

/// `s_eps(t) = c^2 (e^t eps^{d/2 - alpha})^2 max(t, eps^2)^{-d/2}`.
pub fn s_eps(inputs: &BoundInputs, c: f64) -> f64 {
    c * c * inputs.trunk_amplitude().powi(2) * inputs.t_floor().powf(-inputs.half_d())
}

/// Bound on `||X^tau(t, x)||_{L^2}`.
pub fn moment_bound(inputs: &BoundInputs, tree: &TernaryTree) -> f64 {
    inputs.t_floor().powf(-inputs.half_d() / 2.0)
        * inputs.trunk_amplitude()
        * inputs.growth_factor().powi(tree.leaves() as i32 - 1)
}

/// Bound on `||grad X^tau(t, x)||_{L^2}`: [`moment_bound`] times `max(t, eps^2)^{-1/2}`.
pub fn gradient_bound(inputs: &BoundInputs, tree: &TernaryTree) -> f64 {
    moment_bound(inputs, tree) / inputs.t_floor().sqrt()
}

/// `B_eps(t)`, the bound on the second moment of each paired `[•,•,•]` graph.
pub fn b_eps(inputs: &BoundInputs, c: f64) -> f64 {
    let e2 = inputs.epsilon * inputs.epsilon;
    // int_0^t max(s, eps^2)^{-d/2} ds = eps^{2-d} Gamma_{d/2}(t / eps^2)
    let integral = e2.powf(1.0 - inputs.half_d()) * inputs.gamma();
    inputs.t_floor().powf(-inputs.half_d()) * (c * inputs.trunk_amplitude()).powi(6) * integral * integral
}

/// Bound on `||u(t) - u^N(t)||_{L^2}`.
pub fn truncation_bound(inputs: &BoundInputs, n: usize) -> f64 {
    let e = inputs.epsilon;
    let g = inputs.gamma();
    e.powf(2.0 - 3.0 * inputs.alpha)
        * (3.0 * inputs.t).exp()
        * (inputs.t.exp() * e.powf(1.0 - inputs.alpha) * g.powf(1.5)).powi(n as i32 - 1)
}
