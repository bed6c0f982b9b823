use super::check_budget;
use super::distribution::ColRowDistribution;
use super::partition::{partition_budget, FULL_MASS_TOLERANCE};
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

fn squared_norm_products(x: &DenseMatrix, y: &DenseMatrix) -> Vec<f64> {
    x.column_norms()
        .iter()
        .zip(y.row_norms())
        .map(|(a, b)| (a * b) * (a * b))
        .collect()
}

fn check_inputs(x: &DenseMatrix, y: &DenseMatrix, p: &ColRowDistribution) -> Result<()> {
    if x.cols() != y.rows() {
        return Err(Error::Shape {
            op: "variance",
            left: x.shape(),
            right: y.shape(),
        });
    }
    if p.len() != x.cols() {
        return Err(Error::InvalidArgument(format!(
            "distribution has {} atoms, product has {} pairs",
            p.len(),
            x.cols()
        )));
    }
    Ok(())
}

/// `Σ_t ‖X_t‖²‖Y_t‖² / p_t` over the given pairs, skipping pairs whose norm
/// product vanishes.
fn inverse_weighted_sum(
    sq: &[f64],
    p: &ColRowDistribution,
    pairs: impl Iterator<Item = usize>,
) -> Result<f64> {
    let probs = p.probs();
    let mut acc = 0.0;
    for t in pairs {
        if sq[t] == 0.0 {
            continue;
        }
        if probs[t] == 0.0 {
            return Err(Error::UndefinedTerm { index: t });
        }
        acc += sq[t] / probs[t];
    }
    Ok(acc)
}

/// `E‖g - XY‖²_F` for CRS with `k` i.i.d. draws from `p`:
/// `(1/k)(Σ_t ‖X_t‖²‖Y_t‖² / p_t - ‖XY‖²_F)`.
pub fn theoretical_crs_variance(
    x: &DenseMatrix,
    y: &DenseMatrix,
    p: &ColRowDistribution,
    k: usize,
) -> Result<f64> {
    check_inputs(x, y, p)?;
    if k == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    let sq = squared_norm_products(x, y);
    let second_moment = inverse_weighted_sum(&sq, p, 0..p.len())?;
    let exact = x.matmul(y)?.frobenius_norm_sq();
    Ok(((second_moment - exact) / k as f64).max(0.0))
}

/// `E‖ĝ - XY‖²_F` for WTA-CRS with a head of `det_size` atoms:
/// `((1-s) Σ_{j∉C} ‖X_j‖²‖Y_j‖² / p_j - ‖Σ_{j∉C} X_j Y_j‖²_F) / (k - |C|)`.
pub fn theoretical_wta_variance(
    x: &DenseMatrix,
    y: &DenseMatrix,
    p: &ColRowDistribution,
    k: usize,
    det_size: usize,
) -> Result<f64> {
    check_inputs(x, y, p)?;
    check_budget(k, p.len())?;
    let part = partition_budget(p, k, det_size)?;
    let sq = squared_norm_products(x, y);

    let mut in_head = vec![false; p.len()];
    for &c in &part.det_set {
        in_head[c] = true;
    }
    let outside = || (0..p.len()).filter(|&j| !in_head[j]);

    if part.stoc_count == 0 || part.residual.is_none() {
        let live_tail = outside().any(|j| sq[j] > 0.0);
        if live_tail && part.residual_mass > FULL_MASS_TOLERANCE {
            return Err(Error::InvalidArgument(
                "head fills the budget but leaves tail mass unsampled".into(),
            ));
        }
        if live_tail {
            return Err(Error::UndefinedTerm {
                index: outside().find(|&j| sq[j] > 0.0).unwrap(),
            });
        }
        return Ok(0.0);
    }

    let second_moment = part.residual_mass * inverse_weighted_sum(&sq, p, outside())?;
    let mut tail_product = DenseMatrix::zeros(x.rows(), y.cols());
    for j in outside() {
        tail_product.axpy(1.0, &x.outer(j, y, j))?;
    }
    let var = (second_moment - tail_product.frobenius_norm_sq()) / part.stoc_count as f64;
    Ok(var.max(0.0))
}
