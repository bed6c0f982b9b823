use serde::Serialize;

use super::parallel::run_blocks;
use crate::autodiff::{LinearConfig, Network, SamplingMode, Targets};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::tensor::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerGradientStats {
    pub layer: usize,
    pub exact_norm: f64,
    /// `‖mean ∇W - ∇W‖_F / ‖∇W‖_F`.
    pub relative_bias: f64,
    /// `sqrt(E‖∇W_t - mean‖²_F)`.
    pub empirical_std: f64,
    /// `3 · empirical_std / (sqrt(trials) · ‖∇W‖_F)`.
    pub bias_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientReport {
    pub trials: usize,
    pub layers: Vec<LayerGradientStats>,
    /// Largest deviation of any replayed input gradient from the exact one.
    pub input_grad_max_abs_error: f64,
}

/// Replays the backward pass of `net` on one batch `trials` times with fresh
/// sampling streams and compares the mean weight gradients against an exact
/// backward pass.
///
/// Every sampled linear layer must be in [`SamplingMode::Oracle`], so that
/// gradient-norm staleness does not enter the comparison.
pub fn gradient_unbiasedness_experiment(
    net: &Network,
    input: &DenseMatrix,
    row_examples: &[usize],
    targets: &Targets,
    trials: usize,
    seed: u64,
) -> Result<GradientReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let cached = net.linear_layers().iter().any(|l| {
        let c = l.config();
        c.mode != EstimatorKind::Exact && c.sampling != SamplingMode::Oracle
    });
    if cached {
        return Err(Error::InvalidArgument(
            "gradient replays need oracle-mode sampling".into(),
        ));
    }

    let mut exact_net = net.clone();
    exact_net.set_linear_config(LinearConfig::exact())?;
    let out = exact_net.forward(input, row_examples)?;
    let (_, grad_out) = exact_net.loss_kind().loss_and_grad(&out, targets)?;
    let exact_input = exact_net.backward(&grad_out)?;
    let exact = exact_net.weight_grads()?;

    let mut replay = net.clone();
    replay.forward(input, row_examples)?;

    let blocks = run_blocks(trials, |range| -> Result<_> {
        let mut local = replay.clone();
        let mut sums: Vec<DenseMatrix> = exact.iter().map(|g| DenseMatrix::zeros(g.rows(), g.cols())).collect();
        let mut sq: Vec<DenseMatrix> = sums.clone();
        let mut worst: f64 = 0.0;
        for t in range {
            local.reseed_trial(seed, t as u64);
            let gh = local.backward(&grad_out)?;
            worst = worst.max(gh.max_abs_diff(&exact_input)?);
            let grads = local.weight_grads()?;
            for (((s, q), g), e) in sums.iter_mut().zip(sq.iter_mut()).zip(grads).zip(&exact) {
                let d = g.sub(e)?;
                s.axpy(1.0, &d)?;
                q.axpy(1.0, &d.hadamard(&d)?)?;
            }
        }
        Ok((sums, sq, worst))
    });

    let mut sums: Vec<DenseMatrix> = exact.iter().map(|g| DenseMatrix::zeros(g.rows(), g.cols())).collect();
    let mut sq = sums.clone();
    let mut worst: f64 = 0.0;
    for block in blocks {
        let (s, q, w) = block?;
        for (acc, b) in sums.iter_mut().zip(&s) {
            acc.axpy(1.0, b)?;
        }
        for (acc, b) in sq.iter_mut().zip(&q) {
            acc.axpy(1.0, b)?;
        }
        worst = worst.max(w);
    }

    let t = trials as f64;
    let layers = exact
        .iter()
        .enumerate()
        .map(|(layer, g)| {
            // Moments of the deviation from the exact gradient.
            let mean = sums[layer].scale(1.0 / t);
            let spread: f64 = sq[layer]
                .data()
                .iter()
                .zip(mean.data())
                .map(|(s2, m)| (s2 / t - m * m).max(0.0))
                .sum();
            let exact_norm = g.frobenius_norm();
            let bias = mean.frobenius_norm();
            let empirical_std = spread.sqrt();
            let (relative_bias, bias_bound) = if exact_norm > 0.0 {
                (bias / exact_norm, 3.0 * empirical_std / (t.sqrt() * exact_norm))
            } else {
                (bias, 3.0 * empirical_std / t.sqrt())
            };
            LayerGradientStats {
                layer,
                exact_norm,
                relative_bias,
                empirical_std,
                bias_bound,
            }
        })
        .collect();
    Ok(GradientReport {
        trials,
        layers,
        input_grad_max_abs_error: worst,
    })
}
