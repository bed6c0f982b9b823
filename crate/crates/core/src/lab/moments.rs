use serde::Serialize;

use super::parallel::run_blocks;
use crate::error::{Error, Result};
use crate::estimators::{
    theoretical_crs_variance, theoretical_wta_variance, Estimator, EstimatorKind,
};
use crate::tensor::{DenseMatrix, RandomSource};

/// Largest outcome space [`exhaustive_moments`] will enumerate.
pub const OUTCOME_LIMIT: u128 = 1_000_000;

/// First and second moments of an estimator around the exact product.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub kind: EstimatorKind,
    /// Monte-Carlo trials, or the number of enumerated outcomes.
    pub trials: u64,
    pub mean: DenseMatrix,
    /// `E‖est - XY‖²_F`.
    pub empirical_variance: f64,
    pub theoretical_variance: Option<f64>,
    /// `‖mean - XY‖_F`.
    pub bias_norm: f64,
    /// `sqrt(E‖est - mean‖²_F / trials)`; zero for exact enumeration.
    pub bias_stderr: f64,
}

impl MomentReport {
    /// Bias expressed in standard errors; infinite for a nonzero bias with
    /// zero spread.
    pub fn bias_z(&self) -> f64 {
        if self.bias_stderr > 0.0 {
            self.bias_norm / self.bias_stderr
        } else if self.bias_norm > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

fn theoretical(est: &Estimator, x: &DenseMatrix, y: &DenseMatrix) -> Result<Option<f64>> {
    match (est.kind(), est.distribution(), est.partition()) {
        (EstimatorKind::Exact, _, _) => Ok(Some(0.0)),
        (EstimatorKind::Crs, Some(p), _) => theoretical_crs_variance(x, y, p, est.budget()).map(Some),
        (EstimatorKind::WtaCrs, Some(p), Some(part)) => {
            theoretical_wta_variance(x, y, p, est.budget(), part.det_set.len()).map(Some)
        }
        _ => Ok(None),
    }
}

/// Monte-Carlo moments of a prepared estimator. Trial `t` draws from stream
/// `t` of `seed`, so different estimators share random numbers trial by
/// trial.
pub fn monte_carlo_estimator(est: &Estimator, exact: &DenseMatrix, trials: usize, seed: u64) -> Result<MomentReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if exact.shape() != est.output_shape() {
        return Err(Error::Shape {
            op: "monte_carlo",
            left: est.output_shape(),
            right: exact.shape(),
        });
    }
    if est.is_deterministic() {
        let g = est.sample(&mut RandomSource::new(seed, 0));
        let d = g.frobenius_distance(exact)?;
        return Ok(MomentReport {
            kind: est.kind(),
            trials: trials as u64,
            mean: g,
            empirical_variance: d,
            theoretical_variance: None,
            bias_norm: d.sqrt(),
            bias_stderr: 0.0,
        });
    }
    let (rows, cols) = exact.shape();
    let blocks = run_blocks(trials, |range| {
        let mut sum = DenseMatrix::zeros(rows, cols);
        let mut sq = 0.0;
        for t in range {
            let g = est.sample(&mut RandomSource::new(seed, t as u64));
            sq += g.frobenius_distance(exact).unwrap_or(f64::NAN);
            sum.axpy(1.0, &g).expect("shape checked");
        }
        (sum, sq)
    });
    let mut sum = DenseMatrix::zeros(rows, cols);
    let mut sq = 0.0;
    for (s, q) in blocks {
        sum.axpy(1.0, &s)?;
        sq += q;
    }
    let t = trials as f64;
    let mean = sum.scale(1.0 / t);
    let empirical_variance = sq / t;
    let bias_sq = mean.frobenius_distance(exact)?;
    let spread = if trials > 1 {
        ((sq - t * bias_sq) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MomentReport {
        kind: est.kind(),
        trials: trials as u64,
        mean,
        empirical_variance,
        theoretical_variance: None,
        bias_norm: bias_sq.sqrt(),
        bias_stderr: (spread / t).sqrt(),
    })
}

/// Runs `trials` independent estimates of `X·Y` with budget `k` and attaches
/// the closed-form variance where one exists.
pub fn monte_carlo_moments(
    kind: EstimatorKind,
    x: &DenseMatrix,
    y: &DenseMatrix,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<MomentReport> {
    let est = Estimator::new(kind, x, y, k)?;
    let exact = x.matmul(y)?;
    let mut report = monte_carlo_estimator(&est, &exact, trials, seed)?;
    report.theoretical_variance = theoretical(&est, x, y)?;
    Ok(report)
}

/// One report per estimator kind on the same inputs and per-trial streams.
pub fn estimator_comparison(
    x: &DenseMatrix,
    y: &DenseMatrix,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<MomentReport>> {
    EstimatorKind::ALL
        .iter()
        .map(|&kind| monte_carlo_moments(kind, x, y, k, trials, seed))
        .collect()
}

/// Exact mean and `E‖est - XY‖²_F` by enumerating every ordered tuple of
/// tail draws with its probability.
pub fn exhaustive_moments(kind: EstimatorKind, x: &DenseMatrix, y: &DenseMatrix, k: usize) -> Result<MomentReport> {
    let est = Estimator::new(kind, x, y, k)?;
    let exact = x.matmul(y)?;
    let (tail, draws) = est.outcome_space();
    let outcomes = (tail as u128)
        .checked_pow(draws as u32)
        .filter(|&n| n <= OUTCOME_LIMIT)
        .ok_or(Error::OutcomeSpaceTooLarge {
            outcomes: (tail as u128).saturating_pow(draws as u32),
            limit: OUTCOME_LIMIT,
        })?;

    let mut mean = DenseMatrix::zeros(exact.rows(), exact.cols());
    let mut second = 0.0;
    let mut tuple = vec![0usize; draws];
    loop {
        let (g, prob) = est.estimate_for_outcome(&tuple);
        if prob > 0.0 {
            mean.axpy(prob, &g)?;
            second += prob * g.frobenius_distance(&exact)?;
        }
        // Odometer over tail positions.
        let mut i = 0;
        while i < draws {
            tuple[i] += 1;
            if tuple[i] < tail {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
        if i == draws {
            break;
        }
    }
    let bias_norm = mean.frobenius_distance(&exact)?.sqrt();
    Ok(MomentReport {
        kind,
        trials: outcomes as u64,
        mean,
        empirical_variance: second,
        theoretical_variance: theoretical(&est, x, y)?,
        bias_norm,
        bias_stderr: 0.0,
    })
}
