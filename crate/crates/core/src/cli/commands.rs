use serde::Serialize;

use super::config::{
    budget_pairs, check_budget, require_seed, ConcentrationConfig, DistributionKind, EstimateConfig,
    MemoryConfig, TrainConfig, VarianceConfig,
};
use super::output::{num, opt_num, render_csv, render_json, Format, Provenance};
use super::train::run_training;
use super::CliError;
use crate::estimators::{ColRowDistribution, Estimator, EstimatorKind};
use crate::lab::{concentration_curve, monte_carlo_moments, power_law_instance, ConcentrationCurve, MomentReport};
use crate::memory::{activation_bytes, classify_ops, profile_ops, MemoryProfile, ScopeClass};
use crate::tensor::{mix_seed, DenseMatrix, RandomSource};

fn runtime(e: crate::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateResult {
    pub method: EstimatorKind,
    pub k: usize,
    pub det_size: Option<usize>,
    pub frobenius_error: f64,
    pub relative_error: f64,
    pub exact: DenseMatrix,
    pub estimate: DenseMatrix,
}

fn read_matrix(path: &std::path::Path) -> Result<DenseMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// The operands of `estimate`: the given files, or a Gaussian instance drawn
/// from stream 0 of the seed.
pub fn estimate_operands(config: &EstimateConfig, seed: u64) -> Result<(DenseMatrix, DenseMatrix), CliError> {
    match (&config.x, &config.y) {
        (Some(x), Some(y)) => Ok((read_matrix(x)?, read_matrix(y)?)),
        (None, None) => {
            if config.rows == 0 || config.inner == 0 || config.cols == 0 {
                return Err(CliError::Config("matrix dimensions must be positive".into()));
            }
            Ok(power_law_instance(config.rows, config.inner, config.cols, config.decay, &mut RandomSource::new(seed, 0)))
        }
        _ => Err(CliError::Config("give both x and y, or neither".into())),
    }
}

/// One estimate with `k = ⌈budget · inner⌉`, sampled from stream 1 of the
/// seed.
pub fn estimate(config: &EstimateConfig) -> Result<EstimateResult, CliError> {
    let seed = require_seed(config.seed, "estimate")?;
    check_budget(config.budget)?;
    let (x, y) = estimate_operands(config, seed)?;
    if x.cols() != y.rows() {
        return Err(CliError::Config(format!("inner dimensions differ: {:?} x {:?}", x.shape(), y.shape())));
    }
    let k = budget_pairs(config.budget, x.cols());
    let est = Estimator::new(config.method, &x, &y, k).map_err(runtime)?;
    let estimate = est.sample(&mut RandomSource::new(seed, 1));
    let exact = x.matmul(&y).map_err(runtime)?;
    let frobenius_error = estimate.frobenius_distance(&exact).map_err(runtime)?.sqrt();
    let norm = exact.frobenius_norm();
    Ok(EstimateResult {
        method: config.method,
        k,
        det_size: est.partition().map(|p| p.det_set.len()),
        frobenius_error,
        relative_error: if norm > 0.0 { frobenius_error / norm } else { frobenius_error },
        exact,
        estimate,
    })
}

pub fn render_estimate(config: &EstimateConfig, format: Format) -> Result<String, CliError> {
    let result = estimate(config)?;
    let prov = Provenance::new("estimate", config.seed, config)?;
    match format {
        Format::Json => render_json(&prov, &result),
        Format::Csv => render_csv(
            &prov,
            &[],
            &["method", "k", "det_size", "frobenius_error", "relative_error"],
            &[vec![
                result.method.to_string(),
                result.k.to_string(),
                result.det_size.map(|d| d.to_string()).unwrap_or_default(),
                num(result.frobenius_error),
                num(result.relative_error),
            ]],
        ),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceRow {
    pub kind: EstimatorKind,
    pub k: usize,
    pub trials: u64,
    pub bias_norm: f64,
    pub bias_stderr: f64,
    pub empirical_var: f64,
    pub theoretical_var: Option<f64>,
}

impl From<(&MomentReport, usize)> for VarianceRow {
    fn from((r, k): (&MomentReport, usize)) -> Self {
        Self {
            kind: r.kind,
            k,
            trials: r.trials,
            bias_norm: r.bias_norm,
            bias_stderr: r.bias_stderr,
            empirical_var: r.empirical_variance,
            theoretical_var: r.theoretical_variance,
        }
    }
}

/// Moments of each requested kind on the power-law instance of stream 0;
/// trials draw from a seed derived from the master seed.
pub fn variance(config: &VarianceConfig) -> Result<Vec<VarianceRow>, CliError> {
    let seed = require_seed(config.seed, "variance")?;
    check_budget(config.budget)?;
    if config.trials == 0 || config.methods.is_empty() {
        return Err(CliError::Config("variance needs trials >= 1 and at least one method".into()));
    }
    if config.rows == 0 || config.inner == 0 || config.cols == 0 {
        return Err(CliError::Config("matrix dimensions must be positive".into()));
    }
    let (x, y) = power_law_instance(config.rows, config.inner, config.cols, config.decay, &mut RandomSource::new(seed, 0));
    let k = budget_pairs(config.budget, config.inner);
    let trial_seed = mix_seed(seed, 1);
    config
        .methods
        .iter()
        .map(|&kind| {
            let r = monte_carlo_moments(kind, &x, &y, k, config.trials, trial_seed).map_err(runtime)?;
            Ok(VarianceRow::from((&r, k)))
        })
        .collect()
}

pub fn render_variance(config: &VarianceConfig, format: Format) -> Result<String, CliError> {
    let rows = variance(config)?;
    let prov = Provenance::new("variance", config.seed, config)?;
    match format {
        Format::Json => render_json(&prov, &rows),
        Format::Csv => render_csv(
            &prov,
            &[],
            &["kind", "k", "trials", "bias_norm", "bias_stderr", "empirical_var", "theoretical_var"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.kind.to_string(),
                        r.k.to_string(),
                        r.trials.to_string(),
                        num(r.bias_norm),
                        num(r.bias_stderr),
                        num(r.empirical_var),
                        opt_num(r.theoretical_var),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    }
}

pub fn concentration(config: &ConcentrationConfig) -> Result<ConcentrationCurve, CliError> {
    check_budget(config.budget)?;
    let p = match config.distribution {
        DistributionKind::Uniform => ColRowDistribution::uniform(config.m),
        DistributionKind::PowerLaw => ColRowDistribution::power_law(config.m, config.exponent),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let k = config.k.unwrap_or_else(|| budget_pairs(config.budget, config.m));
    concentration_curve(&p, k).map_err(|e| CliError::Config(e.to_string()))
}

pub fn render_concentration(config: &ConcentrationConfig, format: Format) -> Result<String, CliError> {
    let curve = concentration(config)?;
    let prov = Provenance::new("concentration", config.seed, config)?;
    let opt = |v: Option<usize>| v.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
    match format {
        Format::Json => render_json(&prov, &curve),
        Format::Csv => render_csv(
            &prov,
            &[
                ("k", curve.k.to_string()),
                ("first_above", opt(curve.first_above)),
                ("largest_above", opt(curve.largest_above)),
            ],
            &["size", "mass", "reference", "objective", "above"],
            &curve
                .points
                .iter()
                .map(|q| {
                    vec![
                        q.size.to_string(),
                        num(q.mass),
                        num(q.reference),
                        opt_num(q.objective),
                        q.above.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    }
}

pub fn render_train(config: &TrainConfig, format: Format) -> Result<String, CliError> {
    let seed = require_seed(config.seed, "train")?;
    let rows = run_training(config, seed)?;
    let prov = Provenance::new("train", config.seed, config)?;
    match format {
        Format::Json => render_json(&prov, &rows),
        Format::Csv => render_csv(
            &prov,
            &[],
            &["method", "budget", "epoch", "train_loss", "val_accuracy", "diverged"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.method.clone(),
                        num(r.budget),
                        r.epoch.to_string(),
                        num(r.train_loss),
                        num(r.val_accuracy),
                        r.diverged.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    }
}

pub fn memory(config: &MemoryConfig) -> Result<MemoryProfile, CliError> {
    check_budget(config.budget)?;
    let block = config.block();
    let cfg_err = |e: crate::Error| CliError::Config(e.to_string());
    if config.compressible_only {
        let ops: Vec<_> = classify_ops(&block)
            .map_err(cfg_err)?
            .into_iter()
            .filter(|o| o.class == ScopeClass::Compressible)
            .collect();
        profile_ops(&block, &ops, config.budget, config.layers).map_err(cfg_err)
    } else {
        activation_bytes(&block, config.budget, config.layers).map_err(cfg_err)
    }
}

pub fn render_memory(config: &MemoryConfig, format: Format) -> Result<String, CliError> {
    let profile = memory(config)?;
    let prov = Provenance::new("memory", config.seed, config)?;
    match format {
        Format::Json => render_json(&prov, &profile),
        Format::Csv => {
            let mut records: Vec<Vec<String>> = profile
                .ops
                .iter()
                .map(|o| {
                    vec![
                        o.name.to_string(),
                        serde_json::to_value(o.class).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                        o.full_elements.to_string(),
                        num(o.full_bytes),
                        num(o.budget_bytes),
                    ]
                })
                .collect();
            records.push(vec![
                "activations".into(),
                String::new(),
                profile.ops.iter().map(|o| o.full_elements).sum::<u64>().to_string(),
                num(profile.activation_bytes_full),
                num(profile.activation_bytes_budget),
            ]);
            records.push(vec![
                "weights".into(),
                String::new(),
                profile.config.weight_elements().to_string(),
                num(profile.weight_bytes),
                num(profile.weight_bytes),
            ]);
            render_csv(
                &prov,
                &[
                    ("activation_share", num(profile.activation_share)),
                    ("activation_share_budget", num(profile.activation_share_budget)),
                    ("compression_ratio", num(profile.compression_ratio)),
                ],
                &["op", "class", "full_elements", "full_bytes", "budget_bytes"],
                &records,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::wta_crs_estimate;

    #[test]
    fn full_budget_estimate_is_exact() {
        let c = EstimateConfig {
            seed: Some(1),
            budget: 1.0,
            ..EstimateConfig::default()
        };
        assert_eq!(estimate(&c).unwrap().frobenius_error, 0.0);
    }

    #[test]
    fn estimate_matches_library_call() {
        let c = EstimateConfig {
            seed: Some(11),
            ..EstimateConfig::default()
        };
        let r = estimate(&c).unwrap();
        let (x, y) = power_law_instance(16, 64, 8, 0.0, &mut RandomSource::new(11, 0));
        let direct = wta_crs_estimate(&x, &y, 16, &mut RandomSource::new(11, 1)).unwrap();
        assert_eq!(r.estimate, direct);
        assert_eq!(r.k, 16);
    }

    #[test]
    fn estimate_needs_seed() {
        assert!(matches!(estimate(&EstimateConfig::default()), Err(CliError::Config(_))));
    }

    #[test]
    fn variance_rows() {
        let c = VarianceConfig {
            seed: Some(2),
            trials: 500,
            ..VarianceConfig::default()
        };
        let rows = variance(&c).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].empirical_var, 0.0);
        assert!(rows[2].empirical_var < rows[1].empirical_var);
    }

    #[test]
    fn concentration_rows() {
        let c = ConcentrationConfig::default();
        let curve = concentration(&c).unwrap();
        assert_eq!(curve.points.len(), 31);
        assert_eq!(curve.first_above, Some(1));
        let text = render_concentration(&c, Format::Csv).unwrap();
        let data_lines = text.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(data_lines, 1 + 31);
    }

    #[test]
    fn memory_profiles() {
        let full = memory(&MemoryConfig { budget: 1.0, ..MemoryConfig::default() }).unwrap();
        assert_eq!(full.compression_ratio, 1.0);
        let toy = memory(&MemoryConfig {
            compressible_only: true,
            ..MemoryConfig::default()
        })
        .unwrap();
        assert!((toy.compression_ratio - 10.0 / 3.0).abs() < 1e-12);
    }
}
