//! Column-row sampling (CRS) and winner-take-all CRS estimators of a matrix
//! product `X·Y`, plus their closed-form Frobenius variances.
//!
//! Both estimators are built from the pair terms `X[:, i] · Y[i, :]`. CRS
//! averages `k` importance-weighted draws. WTA-CRS sums the `|C|` most probable
//! pairs exactly and spends the remaining `k - |C|` draws on the renormalised
//! tail, which is never worse than CRS once the head carries more than `|C|/k`
//! of the probability mass.

mod distribution;
mod estimate;
mod partition;
mod variance;

pub use distribution::{col_row_distribution, ColRowDistribution};
pub use estimate::{
    crs_estimate, deterministic_topk_estimate, pair_term, wta_crs_estimate, Estimator,
    EstimatorKind,
};
pub use partition::{
    optimal_det_size, partition_budget, variance_condition_holds, BudgetPartition,
    FULL_MASS_TOLERANCE,
};
pub use variance::{theoretical_crs_variance, theoretical_wta_variance};

use crate::error::{Error, Result};

pub(crate) fn check_budget(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "budget k = {k} must satisfy 1 <= k <= m = {m}"
        )));
    }
    Ok(())
}
