//! Wild expansion: ternary trees, leaf pairings, the path decomposition of
//! paired double trees, moment bounds and the tree fields `X^tau`.

pub mod bounds;
pub mod expansion;
pub mod pairing;
pub mod paths;
pub mod trees;

pub use bounds::{b_eps, gamma_a, gradient_bound, moment_bound, s_eps, truncation_bound, BoundInputs};
pub use expansion::{compute_x_tau, expansion_for_noise, expansion_up_to, remainder_rn, truncated_sum, w_approx, wild_sum, WildExpansion};
pub use pairing::{enumerate_pairings, Pairing};
pub use paths::{path_decompose, DoubleTree, PathDecomposition};
pub use trees::{enumerate_trees, CanonicalTreeClass, TernaryTree};
