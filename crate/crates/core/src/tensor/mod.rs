//! Dense matrices, norms and seedable randomness.

mod matrix;
mod random;

pub use matrix::DenseMatrix;
pub use random::{categorical_sample, Categorical, RandomSource, PROB_TOLERANCE};

pub(crate) use random::mix_seed;
