use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::check_budget;
use super::distribution::{col_row_distribution, ColRowDistribution};
use super::partition::{optimal_det_size, partition_budget, BudgetPartition};
use crate::error::{Error, Result};
use crate::tensor::{Categorical, DenseMatrix, RandomSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    #[serde(alias = "full")]
    Exact,
    Crs,
    WtaCrs,
    #[serde(rename = "deterministic", alias = "topk")]
    DeterministicTopK,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Exact,
        EstimatorKind::Crs,
        EstimatorKind::WtaCrs,
        EstimatorKind::DeterministicTopK,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Exact => "exact",
            EstimatorKind::Crs => "crs",
            EstimatorKind::WtaCrs => "wta-crs",
            EstimatorKind::DeterministicTopK => "deterministic",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, EstimatorKind::Crs | EstimatorKind::WtaCrs)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "full" => Ok(EstimatorKind::Exact),
            "crs" => Ok(EstimatorKind::Crs),
            "wta-crs" | "wtacrs" | "wta_crs" => Ok(EstimatorKind::WtaCrs),
            "deterministic" | "deterministic-topk" | "topk" => Ok(EstimatorKind::DeterministicTopK),
            other => Err(Error::InvalidArgument(format!("unknown estimator kind `{other}`"))),
        }
    }
}

/// `f(i) = X[:, i] · Y[i, :] / p_i`.
pub fn pair_term(x: &DenseMatrix, y: &DenseMatrix, i: usize, p: &ColRowDistribution) -> Result<DenseMatrix> {
    check_pair_shapes(x, y, p)?;
    if i >= p.len() {
        return Err(Error::InvalidArgument(format!("pair index {i} out of range")));
    }
    let pi = p.probs()[i];
    if pi == 0.0 {
        return Err(Error::UndefinedTerm { index: i });
    }
    Ok(x.outer(i, y, i).scale(1.0 / pi))
}

fn check_pair_shapes(x: &DenseMatrix, y: &DenseMatrix, p: &ColRowDistribution) -> Result<()> {
    if x.cols() != y.rows() {
        return Err(Error::Shape {
            op: "pair product",
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

#[derive(Clone, Debug)]
enum Plan {
    Fixed(DenseMatrix),
    Sampled {
        head_sum: DenseMatrix,
        tail: Vec<usize>,
        sampler: Categorical,
        // Weight applied to X[:, j]·Y[j, :] for each tail position.
        coefficients: Vec<f64>,
        draws: usize,
    },
}

/// A product `X·Y` prepared for repeated estimation.
///
/// Distribution, head and tail sampler are computed once, so drawing many
/// estimates costs one categorical draw plus one rank-one update per sampled
/// pair.
#[derive(Clone, Debug)]
pub struct Estimator {
    kind: EstimatorKind,
    k: usize,
    xt: DenseMatrix,
    y: DenseMatrix,
    distribution: Option<ColRowDistribution>,
    partition: Option<BudgetPartition>,
    plan: Plan,
}

impl Estimator {
    /// Uses the norm-product distribution and, for WTA-CRS, the
    /// variance-optimal head size.
    pub fn new(kind: EstimatorKind, x: &DenseMatrix, y: &DenseMatrix, k: usize) -> Result<Self> {
        if kind == EstimatorKind::Exact {
            let exact = x.matmul(y)?;
            return Ok(Self {
                kind,
                k,
                xt: x.transpose(),
                y: y.clone(),
                distribution: None,
                partition: None,
                plan: Plan::Fixed(exact),
            });
        }
        let p = col_row_distribution(x, y)?;
        Self::with_distribution(kind, x, y, k, p, None)
    }

    /// Custom distribution, optionally forcing the WTA-CRS head size.
    pub fn with_distribution(
        kind: EstimatorKind,
        x: &DenseMatrix,
        y: &DenseMatrix,
        k: usize,
        p: ColRowDistribution,
        det_size: Option<usize>,
    ) -> Result<Self> {
        check_pair_shapes(x, y, &p)?;
        let m = x.cols();
        let xt = x.transpose();
        let y = y.clone();
        match kind {
            EstimatorKind::Exact => Self::new(kind, x, &y, k),
            EstimatorKind::DeterministicTopK => {
                check_budget(k, m)?;
                let top: Vec<usize> = p.ranked_indices().into_iter().take(k).collect();
                let sum = weighted_pair_sum(&xt, &y, top.iter().map(|&i| (i, 1.0)));
                Ok(Self {
                    kind,
                    k,
                    xt,
                    y,
                    distribution: Some(p),
                    partition: None,
                    plan: Plan::Fixed(sum),
                })
            }
            EstimatorKind::Crs | EstimatorKind::WtaCrs => {
                check_budget(k, m)?;
                let head = match (kind, det_size) {
                    (EstimatorKind::Crs, _) => 0,
                    (_, Some(s)) => s,
                    (_, None) => optimal_det_size(&p, k)?,
                };
                ensure_zero_atoms_vanish(&xt, &y, &p)?;
                let partition = partition_budget(&p, k, head)?;
                let head_sum = weighted_pair_sum(&xt, &y, partition.det_set.iter().map(|&c| (c, 1.0)));
                let plan = if partition.is_fully_deterministic() {
                    Plan::Fixed(head_sum)
                } else {
                    let draws = partition.stoc_count;
                    let probs = p.probs();
                    let coefficients = partition
                        .residual_indices
                        .iter()
                        .map(|&j| partition.residual_mass / (draws as f64 * probs[j]))
                        .collect();
                    Plan::Sampled {
                        head_sum,
                        tail: partition.residual_indices.clone(),
                        sampler: Categorical::new(partition.residual.as_ref().unwrap().probs())?,
                        coefficients,
                        draws,
                    }
                };
                Ok(Self {
                    kind,
                    k,
                    xt,
                    y,
                    distribution: Some(p),
                    partition: Some(partition),
                    plan,
                })
            }
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn budget(&self) -> usize {
        self.k
    }

    pub fn distribution(&self) -> Option<&ColRowDistribution> {
        self.distribution.as_ref()
    }

    pub fn partition(&self) -> Option<&BudgetPartition> {
        self.partition.as_ref()
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.plan, Plan::Fixed(_))
    }

    pub fn output_shape(&self) -> (usize, usize) {
        (self.xt.cols(), self.y.cols())
    }

    /// Number of tail outcomes per draw and draws per estimate; `(1, 0)` for
    /// fixed plans.
    pub(crate) fn outcome_space(&self) -> (usize, usize) {
        match &self.plan {
            Plan::Fixed(_) => (1, 0),
            Plan::Sampled { tail, draws, .. } => (tail.len(), *draws),
        }
    }

    /// Estimate for an explicit tuple of tail positions (indices into the
    /// tail, not pair indices), with its probability.
    pub(crate) fn estimate_for_outcome(&self, outcome: &[usize]) -> (DenseMatrix, f64) {
        match &self.plan {
            Plan::Fixed(m) => (m.clone(), 1.0),
            Plan::Sampled {
                head_sum,
                tail,
                coefficients,
                ..
            } => {
                let q = self.partition.as_ref().unwrap().residual.as_ref().unwrap().probs();
                let mut out = head_sum.clone();
                let mut prob = 1.0;
                for &pos in outcome {
                    add_pair(&mut out, &self.xt, &self.y, tail[pos], coefficients[pos]);
                    prob *= q[pos];
                }
                (out, prob)
            }
        }
    }

    pub fn sample(&self, rng: &mut RandomSource) -> DenseMatrix {
        match &self.plan {
            Plan::Fixed(m) => m.clone(),
            Plan::Sampled {
                head_sum,
                tail,
                sampler,
                coefficients,
                draws,
            } => {
                let mut out = head_sum.clone();
                for _ in 0..*draws {
                    let pos = sampler.sample(rng);
                    add_pair(&mut out, &self.xt, &self.y, tail[pos], coefficients[pos]);
                }
                out
            }
        }
    }
}

// A zero-probability pair with a nonzero term would silently bias the
// estimate.
fn ensure_zero_atoms_vanish(xt: &DenseMatrix, y: &DenseMatrix, p: &ColRowDistribution) -> Result<()> {
    for (i, &pi) in p.probs().iter().enumerate() {
        if pi == 0.0 && xt.row(i).iter().any(|&v| v != 0.0) && y.row(i).iter().any(|&v| v != 0.0) {
            return Err(Error::UndefinedTerm { index: i });
        }
    }
    Ok(())
}

fn add_pair(out: &mut DenseMatrix, xt: &DenseMatrix, y: &DenseMatrix, pair: usize, weight: f64) {
    let y_row = y.row(pair);
    for (r, &xv) in xt.row(pair).iter().enumerate() {
        let a = weight * xv;
        if a == 0.0 {
            continue;
        }
        for (o, &yv) in out.row_mut(r).iter_mut().zip(y_row) {
            *o += a * yv;
        }
    }
}

fn weighted_pair_sum(
    xt: &DenseMatrix,
    y: &DenseMatrix,
    pairs: impl Iterator<Item = (usize, f64)>,
) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(xt.cols(), y.cols());
    for (i, w) in pairs {
        add_pair(&mut out, xt, y, i, w);
    }
    out
}

/// `(1/k) Σ_t f(i_t)` with `i_t` drawn i.i.d. from the norm-product
/// distribution.
pub fn crs_estimate(x: &DenseMatrix, y: &DenseMatrix, k: usize, rng: &mut RandomSource) -> Result<DenseMatrix> {
    Ok(Estimator::new(EstimatorKind::Crs, x, y, k)?.sample(rng))
}

/// Head pairs summed exactly, plus `k - |C|` tail draws scaled by
/// `(1 - Σ_C p_c) / (k - |C|)`.
pub fn wta_crs_estimate(x: &DenseMatrix, y: &DenseMatrix, k: usize, rng: &mut RandomSource) -> Result<DenseMatrix> {
    Ok(Estimator::new(EstimatorKind::WtaCrs, x, y, k)?.sample(rng))
}

/// Unscaled sum of the `k` most probable pair terms. Biased whenever the
/// dropped pairs do not cancel.
pub fn deterministic_topk_estimate(x: &DenseMatrix, y: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let mut rng = RandomSource::new(0, 0);
    Ok(Estimator::new(EstimatorKind::DeterministicTopK, x, y, k)?.sample(&mut rng))
}
