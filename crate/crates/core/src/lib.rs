//! Simulation laboratory for the Allen–Cahn equation started from mollified
//! white noise.
//!
//! The crate follows the solution through three regimes: a Gaussian
//! (Bargmann–Fock) regime driven by the linearised equation, the formation of
//! fronts under the scalar flow of `u' = u - u^3`, and the slow motion of those
//! fronts by mean curvature.

pub mod allen_cahn;
pub mod config;
pub mod error;
pub mod experiments;
pub mod flows;
pub mod grid;
pub mod io;
pub mod mcf;
pub mod schedule;
pub mod random;
pub mod spectral;
pub mod stats;
pub mod wild;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
