//! Analytic activation-memory accounting for a transformer block.
//!
//! Each op of the block stores some activation for its backward pass. Ops
//! whose backward is a sampled matrix product keep a `budget` fraction of it;
//! the rest keep everything. Weights are counted once per layer at full
//! precision and optimizer state is excluded. Nothing here is measured.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub batch: usize,
    pub seq_len: usize,
    pub d_model: usize,
    pub n_head: usize,
    pub d_head: usize,
    pub d_ff: usize,
    pub bytes_per_element: usize,
}

impl BlockConfig {
    /// 768-wide model with 12 heads of 64, a 3072-wide feed-forward, batch 64
    /// and sequence 256 in 4-byte floats.
    pub fn t5_base_like() -> Self {
        Self {
            batch: 64,
            seq_len: 256,
            d_model: 768,
            n_head: 12,
            d_head: 64,
            d_ff: 3072,
            bytes_per_element: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.batch,
            self.seq_len,
            self.d_model,
            self.n_head,
            self.d_head,
            self.d_ff,
            self.bytes_per_element,
        ];
        if fields.contains(&0) {
            return Err(Error::InvalidArgument("block dimensions must be positive".into()));
        }
        if self.n_head * self.d_head != self.d_model {
            return Err(Error::InvalidArgument(format!(
                "d_model {} != n_head {} x d_head {}",
                self.d_model, self.n_head, self.d_head
            )));
        }
        Ok(())
    }

    /// Parameters of one block: four attention projections and the two
    /// feed-forward matrices.
    pub fn weight_elements(&self) -> u64 {
        let d = self.d_model as u64;
        4 * d * d + 2 * d * self.d_ff as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeClass {
    /// Backward is a matrix product that can be sampled.
    Compressible,
    /// Could be stored losslessly in fewer bits; counted at full size here.
    Lossless,
    /// Stored as is.
    Unchanged,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpScope {
    pub name: &'static str,
    pub class: ScopeClass,
    /// Activation elements the op keeps for backward at full budget.
    pub elements: u64,
}

/// The block's ops in forward order with their stored activation sizes.
pub fn classify_ops(config: &BlockConfig) -> Result<Vec<OpScope>> {
    config.validate()?;
    let b = config.batch as u64;
    let s = config.seq_len as u64;
    let bsd = b * s * config.d_model as u64;
    let bsf = b * s * config.d_ff as u64;
    let scores = b * config.n_head as u64 * s * s;
    use ScopeClass::*;
    let op = |name, class, elements| OpScope { name, class, elements };
    Ok(vec![
        op("Linear-Q", Compressible, bsd),
        op("Linear-K", Compressible, bsd),
        op("Linear-V", Compressible, bsd),
        op("TensorMul-1", Compressible, 2 * bsd),
        op("Softmax", Unchanged, scores),
        op("Dropout-Attn", Lossless, scores),
        op("TensorMul-2", Compressible, scores + bsd),
        op("Linear-O", Compressible, bsd),
        op("Dropout-O", Lossless, bsd),
        op("LayerNorm-1", Unchanged, bsd),
        op("Linear-U", Compressible, bsd),
        op("GELU", Lossless, bsf),
        op("Linear-D", Compressible, bsf),
        op("Dropout-D", Lossless, bsd),
        op("LayerNorm-2", Unchanged, bsd),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpMemory {
    pub name: &'static str,
    pub class: ScopeClass,
    pub full_elements: u64,
    pub budget_elements: f64,
    /// Bytes over all layers.
    pub full_bytes: f64,
    pub budget_bytes: f64,
    pub note: Option<&'static str>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemoryProfile {
    pub config: BlockConfig,
    pub budget_fraction: f64,
    pub layers: usize,
    pub ops: Vec<OpMemory>,
    pub weight_bytes: f64,
    pub activation_bytes_full: f64,
    pub activation_bytes_budget: f64,
    /// Activations over weights plus activations, at full budget.
    pub activation_share: f64,
    pub activation_share_budget: f64,
    pub compression_ratio: f64,
}

/// Profile of an explicit op list; [`activation_bytes`] uses the full block.
pub fn profile_ops(
    config: &BlockConfig,
    ops: &[OpScope],
    budget_fraction: f64,
    layers: usize,
) -> Result<MemoryProfile> {
    config.validate()?;
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "budget fraction {budget_fraction} outside (0, 1]"
        )));
    }
    if layers == 0 {
        return Err(Error::InvalidArgument("layer count must be positive".into()));
    }
    let scale = (config.bytes_per_element * layers) as f64;
    let rows: Vec<OpMemory> = ops
        .iter()
        .map(|op| {
            let budget_elements = match op.class {
                ScopeClass::Compressible => budget_fraction * op.elements as f64,
                _ => op.elements as f64,
            };
            OpMemory {
                name: op.name,
                class: op.class,
                full_elements: op.elements,
                budget_elements,
                full_bytes: op.elements as f64 * scale,
                budget_bytes: budget_elements * scale,
                note: (op.class == ScopeClass::Lossless).then_some("counted at full precision"),
            }
        })
        .collect();
    let full: f64 = rows.iter().map(|r| r.full_bytes).sum();
    let budget: f64 = rows.iter().map(|r| r.budget_bytes).sum();
    let weight_bytes = config.weight_elements() as f64 * scale;
    let share = |a: f64| if a + weight_bytes > 0.0 { a / (a + weight_bytes) } else { 0.0 };
    Ok(MemoryProfile {
        config: *config,
        budget_fraction,
        layers,
        activation_share: share(full),
        activation_share_budget: share(budget),
        compression_ratio: if budget > 0.0 { full / budget } else { 1.0 },
        ops: rows,
        weight_bytes,
        activation_bytes_full: full,
        activation_bytes_budget: budget,
    })
}

pub fn activation_bytes(config: &BlockConfig, budget_fraction: f64, layers: usize) -> Result<MemoryProfile> {
    profile_ops(config, &classify_ops(config)?, budget_fraction, layers)
}

/// Full over budgeted activation bytes.
pub fn compression_ratio(config: &BlockConfig, budget_fraction: f64, layers: usize) -> Result<f64> {
    Ok(activation_bytes(config, budget_fraction, layers)?.compression_ratio)
}
