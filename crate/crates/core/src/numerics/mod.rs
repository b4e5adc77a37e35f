//! Dense linear algebra, probability utilities, seeded randomness and
//! optimal assignment.

mod assignment;
pub(crate) mod matrix;
pub(crate) mod prob;
mod rng;

pub use assignment::{hungarian_max, optimal_assignment_accuracy};
pub use matrix::Matrix;
pub use prob::{
    argmax, clipped_ln, cross_entropy, entropy, kl_divergence, softmax, softmax_rows, ProbVector,
    LOG_EPS, SIMPLEX_TOL,
};
pub use rng::{derive_seed, Rng};
pub(crate) use matrix::{dot, l2_norm};
