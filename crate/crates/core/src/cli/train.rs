use serde::Serialize;

use super::config::{check_budget, TaskKind, TrainConfig};
use super::tasks::{gaussian_clusters, majority_token, SplitTask};
use super::CliError;
use crate::autodiff::{LinearConfig, LossKind, Network, Targets};
use crate::error::Error;
use crate::estimators::EstimatorKind;
use crate::tensor::RandomSource;

/// One training method: an estimator kind at a budget fraction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSpec {
    pub label: String,
    pub kind: EstimatorKind,
    pub budget: f64,
}

impl MethodSpec {
    /// Parses `full`, `<kind>` or `<kind>@<budget>`.
    pub fn parse(text: &str, default_budget: f64) -> Result<Self, CliError> {
        let text = text.trim();
        let (name, budget) = match text.split_once('@') {
            Some((n, b)) => {
                let b: f64 = b
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad budget in method '{text}'")))?;
                (n.trim(), b)
            }
            None => (text, default_budget),
        };
        let kind: EstimatorKind = name.parse().map_err(|e: Error| CliError::Config(e.to_string()))?;
        if kind == EstimatorKind::Exact {
            return Ok(Self {
                label: "full".into(),
                kind,
                budget: 1.0,
            });
        }
        check_budget(budget)?;
        Ok(Self {
            label: format!("{kind}@{budget}"),
            kind,
            budget,
        })
    }

    pub fn linear_config(&self, config: &TrainConfig) -> LinearConfig {
        LinearConfig::sampled(self.kind, self.budget).with_sampling(config.sampling)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRow {
    pub method: String,
    pub budget: f64,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub diverged: bool,
}

/// Training loss above this multiple of the first epoch's loss counts as
/// divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

const DATA_STREAM: u64 = 1 << 32;

pub fn build_task(config: &TrainConfig, seed: u64) -> Result<SplitTask, CliError> {
    let task = match config.task {
        TaskKind::GaussianClusters => gaussian_clusters(
            config.examples,
            config.dim,
            config.classes,
            config.blobs,
            config.separation,
            config.val_fraction,
            seed,
        ),
        TaskKind::MajorityToken => majority_token(config.examples, config.seq_len, config.noise, config.val_fraction, seed),
    };
    task.map_err(|e| CliError::Config(e.to_string()))
}

fn build_network(config: &TrainConfig, linear: LinearConfig, seed: u64) -> Result<Network, CliError> {
    let net = match config.task {
        TaskKind::GaussianClusters => Network::mlp(
            &[config.dim, config.hidden, config.classes],
            LossKind::SoftmaxCrossEntropy,
            linear,
            seed,
        ),
        TaskKind::MajorityToken => Network::attention_classifier(2, config.model_dim, config.seq_len, 2, linear, seed),
    };
    net.map_err(|e| CliError::Config(e.to_string()))
}

pub fn validate(config: &TrainConfig) -> Result<Vec<MethodSpec>, CliError> {
    check_budget(config.budget)?;
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(CliError::Config("epochs and batch_size must be positive".into()));
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(CliError::Config(format!("learning rate {} must be positive", config.lr)));
    }
    if config.methods.is_empty() {
        return Err(CliError::Config("no methods given".into()));
    }
    config.methods.iter().map(|m| MethodSpec::parse(m, config.budget)).collect()
}

/// Trains every method from the same initial weights on the same data order
/// and reports one row per epoch. A diverging method stops early with its
/// last row flagged; a NaN loss is a runtime error.
pub fn run_training(config: &TrainConfig, seed: u64) -> Result<Vec<EpochRow>, CliError> {
    let methods = validate(config)?;
    let task = build_task(config, seed)?;
    let val_input = &task.val.inputs;
    let mut rows = Vec::new();
    for method in &methods {
        let mut net = build_network(config, method.linear_config(config), seed)?;
        let mut order_rng = RandomSource::new(seed, DATA_STREAM);
        let mut order: Vec<usize> = (0..task.train.len()).collect();
        let mut first_loss = None;
        for epoch in 1..=config.epochs {
            order_rng.shuffle(&mut order);
            let mut total = 0.0;
            let mut batches = 0usize;
            let mut diverged = false;
            for chunk in order.chunks(config.batch_size) {
                let (x, ids, labels) = task.train.batch(chunk);
                match net.train_step(&x, &ids, &Targets::Classes(labels), config.lr) {
                    Ok(loss) => {
                        total += loss;
                        batches += 1;
                    }
                    Err(Error::Divergence { loss, .. }) if !loss.is_nan() => {
                        diverged = true;
                        break;
                    }
                    Err(e) => return Err(CliError::Runtime(format!("{}: {e}", method.label))),
                }
            }
            let train_loss = if diverged { f64::INFINITY } else { total / batches.max(1) as f64 };
            let base = *first_loss.get_or_insert(train_loss);
            diverged |= train_loss > DIVERGENCE_FACTOR * base;
            let val_accuracy = net
                .accuracy(val_input, &task.val.labels)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            rows.push(EpochRow {
                method: method.label.clone(),
                budget: method.budget,
                epoch,
                train_loss,
                val_accuracy,
                diverged,
            });
            if diverged {
                break;
            }
        }
    }
    Ok(rows)
}

/// Final validation accuracy of each method, in method order.
pub fn final_accuracies(rows: &[EpochRow]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(m, _)| *m == r.method) {
            Some(entry) => entry.1 = r.val_accuracy,
            None => out.push((r.method.clone(), r.val_accuracy)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(task: TaskKind, methods: &[&str]) -> TrainConfig {
        TrainConfig {
            task,
            methods: methods.iter().map(|s| s.to_string()).collect(),
            epochs: 3,
            examples: 200,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn method_parsing() {
        let m = MethodSpec::parse("wta-crs@0.3", 0.5).unwrap();
        assert_eq!((m.kind, m.budget, m.label.as_str()), (EstimatorKind::WtaCrs, 0.3, "wta-crs@0.3"));
        assert_eq!(MethodSpec::parse("crs", 0.2).unwrap().budget, 0.2);
        assert_eq!(MethodSpec::parse("full", 0.2).unwrap().label, "full");
        assert!(MethodSpec::parse("crs@1.5", 0.2).is_err());
        assert!(MethodSpec::parse("magic", 0.2).is_err());
        assert!(MethodSpec::parse("crs@x", 0.2).is_err());
    }

    #[test]
    fn full_budget_matches_full_training() {
        let rows = run_training(&small(TaskKind::GaussianClusters, &["full", "wta-crs@1.0"]), 3).unwrap();
        let (full, wta): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r.method == "full");
        assert_eq!(full.len(), 3);
        for (a, b) in full.iter().zip(&wta) {
            assert_eq!(a.train_loss, b.train_loss);
            assert_eq!(a.val_accuracy, b.val_accuracy);
        }
    }

    #[test]
    fn attention_task_trains() {
        let rows = run_training(&small(TaskKind::MajorityToken, &["full", "wta-crs@0.3"]), 4).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.train_loss.is_finite() && !r.diverged));
    }

    #[test]
    fn finals_follow_method_order() {
        let rows = run_training(&small(TaskKind::GaussianClusters, &["crs@0.2", "full"]), 5).unwrap();
        let finals = final_accuracies(&rows);
        assert_eq!(finals.len(), 2);
        assert_eq!(finals[0].0, "crs@0.2");
        assert_eq!(finals[1].1, rows.last().unwrap().val_accuracy);
    }

    #[test]
    fn bad_hyperparameters_are_config_errors() {
        let mut c = small(TaskKind::GaussianClusters, &["full"]);
        c.lr = -1.0;
        assert!(matches!(run_training(&c, 0), Err(CliError::Config(_))));
    }
}
