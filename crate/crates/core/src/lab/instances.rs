use crate::tensor::{DenseMatrix, RandomSource};

/// Gaussian `X` (`rows × m`) and `Y` (`m × cols`).
pub fn random_instance(rows: usize, m: usize, cols: usize, rng: &mut RandomSource) -> (DenseMatrix, DenseMatrix) {
    let x = DenseMatrix::random_normal(rows, m, 1.0, rng);
    let y = DenseMatrix::random_normal(m, cols, 1.0, rng);
    (x, y)
}

/// Gaussian instance with column `i` of `X` scaled by `(i + 1)^-decay`, which
/// concentrates the norm-product distribution on the leading pairs.
pub fn power_law_instance(
    rows: usize,
    m: usize,
    cols: usize,
    decay: f64,
    rng: &mut RandomSource,
) -> (DenseMatrix, DenseMatrix) {
    let (x, y) = random_instance(rows, m, cols, rng);
    let x = DenseMatrix::from_fn(rows, m, |r, c| x.get(r, c) * ((c + 1) as f64).powf(-decay));
    (x, y)
}
