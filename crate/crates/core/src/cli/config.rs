use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::CliError;
use crate::autodiff::SamplingMode;
use crate::estimators::EstimatorKind;

/// Presets shipped with the tool, by name.
pub const PRESETS: [(&str, &str); 2] = [
    ("t5-base-like", include_str!("../../presets/t5-base-like.toml")),
    ("all-compressible", include_str!("../../presets/all-compressible.toml")),
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

fn toml_section(source: &str, command: &str, origin: &str) -> Result<Option<Map<String, Value>>, CliError> {
    let table: toml::Table = toml::from_str(source)
        .map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    let value = serde_json::to_value(table).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    match value.get(command) {
        None => Ok(None),
        Some(Value::Object(m)) => Ok(Some(m.clone())),
        Some(_) => Err(CliError::Config(format!("{origin}: [{command}] must be a table"))),
    }
}

/// Layers command defaults, an optional preset, an optional TOML file and
/// command-line overrides, in increasing precedence. Keys are read from the
/// `[command]` table of the preset and the file; unknown keys are errors.
pub fn resolve<T>(
    command: &str,
    preset: Option<&str>,
    config_path: Option<&Path>,
    flags: Map<String, Value>,
) -> Result<T, CliError>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut merged = match serde_json::to_value(T::default()) {
        Ok(Value::Object(m)) => m,
        _ => return Err(CliError::Config("defaults are not a table".into())),
    };
    if let Some(name) = preset {
        let source = preset_source(name).ok_or_else(|| {
            let known: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("unknown preset '{name}' (known: {})", known.join(", ")))
        })?;
        let section = toml_section(source, command, &format!("preset '{name}'"))?
            .ok_or_else(|| CliError::Config(format!("preset '{name}' has no settings for '{command}'")))?;
        merged.extend(section);
    }
    if let Some(path) = config_path {
        let source = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(section) = toml_section(&source, command, &path.display().to_string())? {
            merged.extend(section);
        }
    }
    merged.extend(flags);
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(format!("{command}: {e}")))
}

pub(crate) fn check_budget(budget: f64) -> Result<(), CliError> {
    if budget > 0.0 && budget <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("budget {budget} outside (0, 1]")))
    }
}

pub(crate) fn require_seed(seed: Option<u64>, command: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Config(format!("{command} is stochastic and needs --seed")))
}

/// `⌈budget · m⌉`, at least one.
pub fn budget_pairs(budget: f64, m: usize) -> usize {
    ((budget * m as f64 - 1e-9).ceil() as usize).clamp(1, m.max(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub seed: Option<u64>,
    pub method: EstimatorKind,
    pub budget: f64,
    pub rows: usize,
    pub inner: usize,
    pub cols: usize,
    /// Column `i` of the random `X` is scaled by `(i + 1)^-decay`.
    pub decay: f64,
    /// JSON matrix files replacing the random instance.
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            seed: None,
            method: EstimatorKind::WtaCrs,
            budget: 0.25,
            rows: 16,
            inner: 64,
            cols: 8,
            decay: 0.0,
            x: None,
            y: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceConfig {
    pub seed: Option<u64>,
    pub methods: Vec<EstimatorKind>,
    pub budget: f64,
    pub trials: usize,
    pub rows: usize,
    pub inner: usize,
    pub cols: usize,
    pub decay: f64,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self {
            seed: None,
            methods: EstimatorKind::ALL.to_vec(),
            budget: 0.25,
            trials: 10_000,
            rows: 16,
            inner: 64,
            cols: 8,
            decay: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    Uniform,
    PowerLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub seed: Option<u64>,
    pub distribution: DistributionKind,
    pub m: usize,
    pub exponent: f64,
    pub budget: f64,
    /// Overrides `⌈budget · m⌉`.
    pub k: Option<usize>,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            seed: None,
            distribution: DistributionKind::PowerLaw,
            m: 100,
            exponent: 2.0,
            budget: 0.3,
            k: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Gaussian blobs classified by a two-layer ReLU MLP.
    GaussianClusters,
    /// Binary token sequences labelled by their majority token, classified
    /// by an attention block.
    MajorityToken,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: Option<u64>,
    pub task: TaskKind,
    /// `full`, or `<kind>[@budget]` with the kind's budget defaulting to
    /// `budget`.
    pub methods: Vec<String>,
    pub budget: f64,
    pub sampling: SamplingMode,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub examples: usize,
    pub val_fraction: f64,
    pub classes: usize,
    pub dim: usize,
    pub hidden: usize,
    /// Gaussian blobs per class.
    pub blobs: usize,
    pub separation: f64,
    pub seq_len: usize,
    pub model_dim: usize,
    pub noise: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: None,
            task: TaskKind::GaussianClusters,
            methods: ["full", "wta-crs@0.3", "crs@0.1", "deterministic@0.1"]
                .map(String::from)
                .to_vec(),
            budget: 0.3,
            sampling: SamplingMode::Cached,
            epochs: 30,
            lr: 0.05,
            batch_size: 64,
            examples: 2000,
            val_fraction: 0.2,
            classes: 4,
            dim: 12,
            hidden: 128,
            blobs: 8,
            separation: 2.0,
            seq_len: 9,
            model_dim: 16,
            noise: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    pub seed: Option<u64>,
    pub batch: usize,
    pub seq_len: usize,
    pub d_model: usize,
    pub n_head: usize,
    pub d_head: usize,
    pub d_ff: usize,
    pub bytes_per_element: usize,
    pub layers: usize,
    pub budget: f64,
    /// Keep only the sampled-product ops of the block.
    pub compressible_only: bool,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        let b = crate::memory::BlockConfig::t5_base_like();
        Self {
            seed: None,
            batch: b.batch,
            seq_len: b.seq_len,
            d_model: b.d_model,
            n_head: b.n_head,
            d_head: b.d_head,
            d_ff: b.d_ff,
            bytes_per_element: b.bytes_per_element,
            layers: 24,
            budget: 0.3,
            compressible_only: false,
        }
    }
}

impl MemoryConfig {
    pub fn block(&self) -> crate::memory::BlockConfig {
        crate::memory::BlockConfig {
            batch: self.batch,
            seq_len: self.seq_len,
            d_model: self.d_model,
            n_head: self.n_head,
            d_head: self.d_head,
            d_ff: self.d_ff,
            bytes_per_element: self.bytes_per_element,
        }
    }
}
