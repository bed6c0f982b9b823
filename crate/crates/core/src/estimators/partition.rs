use serde::Serialize;

use super::check_budget;
use super::distribution::ColRowDistribution;
use crate::error::{Error, Result};

/// Residual mass at or below which a deterministic head is treated as
/// covering the whole distribution.
pub const FULL_MASS_TOLERANCE: f64 = 1e-12;

/// Split of a budget `k` into a deterministic head `C` and `k - |C|`
/// stochastic draws from the renormalised tail.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetPartition {
    pub k: usize,
    /// Head indices, ascending.
    pub det_set: Vec<usize>,
    pub det_mass: f64,
    /// Positive-probability atoms outside the head, ascending.
    pub residual_indices: Vec<usize>,
    /// Tail distribution aligned with `residual_indices`; `None` when the
    /// head covers every positive atom.
    pub residual: Option<ColRowDistribution>,
    /// `Σ p_j` over the tail, summed directly rather than as `1 - det_mass`.
    pub residual_mass: f64,
    pub stoc_count: usize,
}

impl BudgetPartition {
    pub fn is_fully_deterministic(&self) -> bool {
        self.residual.is_none() || self.stoc_count == 0
    }
}

/// Head size minimising `(1 - Σ_{c∈C} p_c) / (k - |C|)` over `|C| < k`.
///
/// When a head of at most `k` atoms already carries all the mass, returns the
/// smallest such head, making the estimator exact. Ties go to the smaller
/// head.
pub fn optimal_det_size(p: &ColRowDistribution, k: usize) -> Result<usize> {
    check_budget(k, p.len())?;
    let ranked = p.ranked_indices();
    let probs = p.probs();

    // tail[s] = mass outside the top-s atoms, accumulated from the small end.
    let mut tail = vec![0.0; ranked.len() + 1];
    for s in (0..ranked.len()).rev() {
        tail[s] = tail[s + 1] + probs[ranked[s]];
    }

    if let Some(s) = (0..=k).find(|&s| tail[s] <= FULL_MASS_TOLERANCE) {
        return Ok(s);
    }

    let mut best = 0;
    let mut best_obj = tail[0] / k as f64;
    for s in 1..k {
        let obj = tail[s] / (k - s) as f64;
        if obj < best_obj * (1.0 - 1e-12) {
            best = s;
            best_obj = obj;
        }
    }
    Ok(best)
}

/// Builds the head of the `det_size` most probable atoms and the tail
/// distribution over the remaining positive atoms.
///
/// Zero-probability atoms never enter the head or the tail, so a `det_size`
/// beyond the support is clamped to it.
pub fn partition_budget(p: &ColRowDistribution, k: usize, det_size: usize) -> Result<BudgetPartition> {
    if det_size > k {
        return Err(Error::InvalidArgument(format!(
            "det_size {det_size} exceeds budget {k}"
        )));
    }
    if det_size > p.len() {
        return Err(Error::InvalidArgument(format!(
            "det_size {det_size} exceeds the {} available pairs",
            p.len()
        )));
    }
    let probs = p.probs();
    let head = det_size.min(p.support_size());
    let mut det_set: Vec<usize> = p.ranked_indices().into_iter().take(head).collect();
    det_set.sort_unstable();

    let mut in_head = vec![false; probs.len()];
    for &c in &det_set {
        in_head[c] = true;
    }
    let det_mass: f64 = det_set.iter().map(|&c| probs[c]).sum();
    let residual_indices: Vec<usize> = (0..probs.len())
        .filter(|&j| !in_head[j] && probs[j] > 0.0)
        .collect();
    let residual_mass: f64 = residual_indices.iter().map(|&j| probs[j]).sum();
    let residual = if residual_indices.is_empty() {
        None
    } else if det_set.is_empty() && residual_indices.len() == probs.len() {
        Some(p.clone())
    } else {
        Some(ColRowDistribution::from_normalised_unchecked(
            residual_indices.iter().map(|&j| probs[j] / residual_mass).collect(),
        ))
    };

    Ok(BudgetPartition {
        k,
        stoc_count: k - det_set.len(),
        det_set,
        det_mass,
        residual_indices,
        residual,
        residual_mass,
    })
}

/// `Σ_{c∈C} p_c > |C| / k` for the top-`det_size` head.
pub fn variance_condition_holds(p: &ColRowDistribution, k: usize, det_size: usize) -> Result<bool> {
    if det_size > k {
        return Err(Error::InvalidArgument(format!(
            "det_size {det_size} exceeds budget {k}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    Ok(p.top_mass(det_size) > det_size as f64 / k as f64)
}
