use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, PROB_TOLERANCE};

/// Probability vector over the `m` column-row pair indices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColRowDistribution {
    probs: Vec<f64>,
}

impl ColRowDistribution {
    /// Validates and renormalises a probability vector whose sum is already
    /// within [`PROB_TOLERANCE`] of one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Degenerate("empty distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self::normalised(probs, total))
    }

    /// Normalises arbitrary non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Degenerate("empty distribution".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Degenerate("all weights are zero".into()));
        }
        Ok(Self::normalised(weights.to_vec(), total))
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; m])
    }

    /// `p_i ∝ (i + 1)^(-exponent)`.
    pub fn power_law(m: usize, exponent: f64) -> Result<Self> {
        let w: Vec<f64> = (1..=m).map(|i| (i as f64).powf(-exponent)).collect();
        Self::from_weights(&w)
    }

    fn normalised(mut probs: Vec<f64>, total: f64) -> Self {
        if total != 1.0 {
            for p in &mut probs {
                *p /= total;
            }
        }
        Self { probs }
    }

    pub(crate) fn from_normalised_unchecked(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Number of atoms with positive probability.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// Indices by descending probability, ties by ascending index.
    pub fn ranked_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        idx
    }

    /// Total mass of the `s` most probable atoms.
    pub fn top_mass(&self, s: usize) -> f64 {
        self.ranked_indices()
            .iter()
            .take(s)
            .map(|&i| self.probs[i])
            .sum()
    }
}

/// Norm-product distribution `p_i ∝ ‖X[:, i]‖ · ‖Y[i, :]‖`, the CRS
/// variance minimiser.
pub fn col_row_distribution(x: &DenseMatrix, y: &DenseMatrix) -> Result<ColRowDistribution> {
    if x.cols() != y.rows() {
        return Err(Error::Shape {
            op: "col_row_distribution",
            left: x.shape(),
            right: y.shape(),
        });
    }
    let weights: Vec<f64> = x
        .column_norms()
        .iter()
        .zip(y.row_norms())
        .map(|(a, b)| a * b)
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Degenerate(
            "every column-row norm product is zero".into(),
        ));
    }
    ColRowDistribution::from_weights(&weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn identity_is_uniform() {
        let i2 = DenseMatrix::identity(2);
        let p = col_row_distribution(&i2, &i2).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn hand_computed_norm_products() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [0.0, 0.0]]).unwrap();
        let p = col_row_distribution(&x, &DenseMatrix::identity(2)).unwrap();
        assert!(close(p.probs(), &[1.0 / 3.0, 2.0 / 3.0]));
    }

    #[test]
    fn zero_column_gets_zero_mass() {
        let x = DenseMatrix::from_rows(&[[1.0, 0.0, 2.0], [1.0, 0.0, 1.0]]).unwrap();
        let y = DenseMatrix::from_rows(&[[1.0], [5.0], [1.0]]).unwrap();
        let p = col_row_distribution(&x, &y).unwrap();
        assert_eq!(p.probs()[1], 0.0);
        assert_eq!(p.support_size(), 2);
    }

    #[test]
    fn degenerate_product() {
        let x = DenseMatrix::zeros(2, 3);
        let y = DenseMatrix::identity(3);
        assert!(matches!(col_row_distribution(&x, &y), Err(Error::Degenerate(_))));
        assert!(matches!(
            col_row_distribution(&x, &DenseMatrix::identity(2)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn construction_validation() {
        assert!(ColRowDistribution::new(vec![]).is_err());
        assert!(ColRowDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(ColRowDistribution::new(vec![1.5, -0.5]).is_err());
        let p = ColRowDistribution::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ranking_is_stable() {
        let p = ColRowDistribution::new(vec![0.2, 0.3, 0.2, 0.3]).unwrap();
        assert_eq!(p.ranked_indices(), vec![1, 3, 0, 2]);
        assert!((p.top_mass(2) - 0.6).abs() < 1e-15);
        assert_eq!(p.top_mass(0), 0.0);
    }
}
