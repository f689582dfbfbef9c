//! Browser demo: draw mollified noise, run Allen–Cahn on it and watch the
//! fronts form, then hand the sign pattern to the level-set flow.

use frontlab::allen_cahn::{evolve, SolverConfig};
use frontlab::io::RENDER_RANGE;
use frontlab::mcf::{evolve_levelset, extract_nodal, sign_map, LevelSetConfig};
use frontlab::random::{make_eta_eps, sample_white_noise_replica, NoiseSpec};
use frontlab::schedule::Schedule;
use frontlab::{Field, Grid};
use wasm_bindgen::prelude::*;

fn js_err(e: frontlab::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Lab {
    field: Field,
    schedule: Schedule,
    dt: f64,
    /// Level-set datum at sigma = 1 once the run has switched to curvature
    /// flow; `field` then holds `w` with sigma in its time slot.
    datum: Option<Field>,
}

#[wasm_bindgen]
impl Lab {
    /// Fresh `eta_eps` on an `n x n` grid of side `extent`.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, extent: f64, epsilon: f64, seed: u64) -> Result<Lab, JsError> {
        let grid = Grid::new(2, n, extent).map_err(js_err)?;
        let spec = NoiseSpec::new(epsilon, 0.5, seed).map_err(js_err)?;
        let schedule = Schedule::new(epsilon, 0.5, 0.75, 0.0, 2).map_err(js_err)?;
        let noise = sample_white_noise_replica(&grid, seed, 0);
        let field = make_eta_eps(&noise, &spec).map_err(js_err)?;
        Ok(Lab {
            field,
            schedule,
            dt: 0.05,
            datum: None,
        })
    }

    pub fn size(&self) -> usize {
        self.field.grid().points_per_axis()
    }

    /// Physical time, or sigma after `to_level_set`.
    pub fn time(&self) -> f64 {
        self.field.time()
    }

    pub fn t_star(&self) -> f64 {
        self.schedule.t_star
    }

    pub fn is_level_set(&self) -> bool {
        self.datum.is_some()
    }

    /// Advance by `span`: Allen–Cahn time, or rescaled time for the level set.
    pub fn advance(&mut self, span: f64) -> Result<(), JsError> {
        if !(span > 0.0) {
            return Err(JsError::new("span must be positive"));
        }
        let t = self.field.time();
        self.field = if let Some(w1) = &self.datum {
            let mut out = evolve_levelset(w1, &[t + span], &LevelSetConfig::default()).map_err(js_err)?;
            out.pop().expect("one sigma requested")
        } else {
            let cfg = if t == 0.0 {
                SolverConfig::for_noise(self.dt, self.schedule.epsilon)
            } else {
                SolverConfig::new(self.dt)
            }
            .map_err(js_err)?;
            evolve(&self.field, t, t + span, &cfg).map_err(js_err)?
        };
        Ok(())
    }

    /// Freeze the current sign pattern as the level-set datum at sigma = 1.
    pub fn to_level_set(&mut self) -> Result<(), JsError> {
        if self.datum.is_none() {
            let mut out = sign_map(&self.field, &[1.0], &LevelSetConfig::default()).map_err(js_err)?;
            let w1 = out.pop().expect("one sigma requested");
            self.field = w1.clone();
            self.datum = Some(w1);
        }
        Ok(())
    }

    /// RGBA pixels, blue negative through white to red positive. The level
    /// set is shown by sign only; small Allen–Cahn states (early times) are
    /// stretched to their own maximum.
    pub fn rgba(&self) -> Vec<u8> {
        let (lo, hi) = RENDER_RANGE;
        let m = self.field.max_abs();
        let gain = if self.datum.is_none() && m > 0.0 && m < 0.5 { hi / m } else { 1.0 };
        let mut out = Vec::with_capacity(self.field.values().len() * 4);
        for &v in self.field.values() {
            let v = if self.datum.is_some() { hi * v.signum() } else { v * gain };
            let s = ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 2.0 - 1.0;
            let (r, g, b) = if s >= 0.0 {
                (255.0, 255.0 * (1.0 - s), 255.0 * (1.0 - s))
            } else {
                (255.0 * (1.0 + s), 255.0 * (1.0 + s), 255.0)
            };
            out.extend_from_slice(&[r as u8, g as u8, b as u8, 255]);
        }
        out
    }

    /// Zero-level segments as `[x0, y0, x1, y1, ...]` in pixel units.
    pub fn nodal_segments(&self) -> Result<Vec<f64>, JsError> {
        let nodal = extract_nodal(&self.field).map_err(js_err)?;
        let g = self.field.grid();
        let h = g.spacing();
        let n = g.points_per_axis() as f64;
        // Physical coordinates back to (column, row) pixel positions.
        let px = |c: f64| (c / h + n / 2.0).rem_euclid(n);
        let mut out = Vec::new();
        for (a, b) in nodal.segments() {
            let (x0, y0, x1, y1) = (px(a[1]), px(a[0]), px(b[1]), px(b[0]));
            // Skip segments that wrap across the periodic seam.
            if (x0 - x1).abs() < n / 2.0 && (y0 - y1).abs() < n / 2.0 {
                out.extend_from_slice(&[x0, y0, x1, y1]);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fronts_form_and_flow() {
        let mut lab = Lab::new(64, 3.2, 0.1, 5).unwrap();
        lab.advance(3.0).unwrap();
        assert!(lab.field.max_abs() > 0.5);
        assert_eq!(lab.rgba().len(), 64 * 64 * 4);
        lab.to_level_set().unwrap();
        assert_eq!(lab.time(), 1.0);
        lab.advance(0.2).unwrap();
        assert!((lab.time() - 1.2).abs() < 1e-12);
        assert!(lab.nodal_segments().unwrap().len() % 4 == 0);
    }
}
