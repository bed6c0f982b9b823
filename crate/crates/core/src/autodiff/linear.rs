use serde::{Deserialize, Serialize};

use super::cache::GradNormCache;
use crate::error::{Error, Result};
use crate::estimators::{
    optimal_det_size, partition_budget, ColRowDistribution, EstimatorKind,
};
use crate::tensor::{Categorical, DenseMatrix, RandomSource};

/// Where the sampling distribution's gradient norms come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Sample during forward with norms cached at each example's previous
    /// backward pass.
    Cached,
    /// Keep the full activation and sample during backward with the current
    /// output-gradient row norms.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub mode: EstimatorKind,
    pub budget_fraction: f64,
    pub sampling: SamplingMode,
}

impl LinearConfig {
    pub fn exact() -> Self {
        Self {
            mode: EstimatorKind::Exact,
            budget_fraction: 1.0,
            sampling: SamplingMode::Cached,
        }
    }

    pub fn sampled(mode: EstimatorKind, budget_fraction: f64) -> Self {
        Self {
            mode,
            budget_fraction,
            sampling: SamplingMode::Cached,
        }
    }

    pub fn with_sampling(mut self, sampling: SamplingMode) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "budget fraction {} outside (0, 1]",
                self.budget_fraction
            )));
        }
        Ok(())
    }

    /// `⌈budget · rows⌉`, robust to representation error in the product.
    pub fn budget_rows(&self, rows: usize) -> usize {
        let k = (self.budget_fraction * rows as f64 - 1e-9).ceil() as usize;
        k.clamp(1, rows.max(1))
    }
}

/// Rows kept for the weight gradient, already multiplied by their scale.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledActivation {
    pub rows: DenseMatrix,
    /// Source row of each kept row: the head (ascending) then the stochastic
    /// draws (ascending, repeats allowed).
    pub kept_indices: Vec<usize>,
    pub scales: Vec<f64>,
    pub det_count: usize,
}

impl SampledActivation {
    fn identity(h: &DenseMatrix) -> Self {
        Self {
            rows: h.clone(),
            kept_indices: (0..h.rows()).collect(),
            scales: vec![1.0; h.rows()],
            det_count: h.rows(),
        }
    }

    fn empty(cols: usize) -> Self {
        Self {
            rows: DenseMatrix::zeros(0, cols),
            kept_indices: Vec::new(),
            scales: Vec::new(),
            det_count: 0,
        }
    }

    fn from_selection(h: &DenseMatrix, kept: Vec<usize>, scales: Vec<f64>, det_count: usize) -> Self {
        let mut rows = h.select_rows(&kept);
        for (r, &s) in scales.iter().enumerate() {
            if s != 1.0 {
                rows.row_mut(r).iter_mut().for_each(|v| *v *= s);
            }
        }
        Self {
            rows,
            kept_indices: kept,
            scales,
            det_count,
        }
    }

    pub fn len(&self) -> usize {
        self.kept_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_indices.is_empty()
    }
}

/// WTA-CRS row selection with `p_i ∝ z_i ‖H[i, :]‖`.
pub fn subsample(
    h: &DenseMatrix,
    grad_norms: &[f64],
    k: usize,
    rng: &mut RandomSource,
) -> Result<SampledActivation> {
    subsample_with(EstimatorKind::WtaCrs, h, grad_norms, k, rng)
}

/// Row selection for any estimator kind. A full budget keeps every row
/// unscaled.
pub fn subsample_with(
    kind: EstimatorKind,
    h: &DenseMatrix,
    grad_norms: &[f64],
    k: usize,
    rng: &mut RandomSource,
) -> Result<SampledActivation> {
    let n = h.rows();
    if grad_norms.len() != n {
        return Err(Error::Shape {
            op: "subsample",
            left: h.shape(),
            right: (grad_norms.len(), 1),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "budget {k} must lie in 1..={n}"
        )));
    }
    if k == n || kind == EstimatorKind::Exact {
        return Ok(SampledActivation::identity(h));
    }

    let weights: Vec<f64> = h
        .row_norms()
        .iter()
        .zip(grad_norms)
        .map(|(a, z)| a * z)
        .collect();
    let p = ColRowDistribution::from_weights(&weights)?;

    if kind == EstimatorKind::DeterministicTopK {
        let mut top: Vec<usize> = p.ranked_indices().into_iter().take(k).collect();
        top.sort_unstable();
        return Ok(SampledActivation::from_selection(h, top, vec![1.0; k], k));
    }

    let det_size = if kind == EstimatorKind::Crs {
        0
    } else {
        optimal_det_size(&p, k)?
    };
    let part = partition_budget(&p, k, det_size)?;
    let mut kept = part.det_set.clone();
    let mut scales = vec![1.0; kept.len()];
    if let (Some(q), true) = (&part.residual, part.stoc_count > 0) {
        let sampler = Categorical::new(q.probs())?;
        let mut draws: Vec<usize> = (0..part.stoc_count)
            .map(|_| part.residual_indices[sampler.sample(rng)])
            .collect();
        draws.sort_unstable();
        let probs = p.probs();
        for j in draws {
            kept.push(j);
            scales.push(part.residual_mass / (part.stoc_count as f64 * probs[j]));
        }
    }
    let det_count = part.det_set.len();
    Ok(SampledActivation::from_selection(h, kept, scales, det_count))
}

#[derive(Clone, Debug)]
enum Saved {
    Full(DenseMatrix),
    Sampled(SampledActivation),
}

#[derive(Clone, Debug)]
struct Context {
    saved: Saved,
    row_examples: Vec<usize>,
}

/// Bias-free linear layer `Z = H W` with a configurable weight-gradient
/// estimator.
#[derive(Clone, Debug)]
pub struct LinearLayer {
    weight: DenseMatrix,
    config: LinearConfig,
    rng: RandomSource,
    cache: GradNormCache,
    ctx: Option<Context>,
    grad_weight: Option<DenseMatrix>,
}

impl LinearLayer {
    pub fn new(weight: DenseMatrix, config: LinearConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            weight,
            config,
            rng: RandomSource::new(0, 0),
            cache: GradNormCache::default(),
            ctx: None,
            grad_weight: None,
        })
    }

    /// Gaussian init with standard deviation `sqrt(2 / in_dim)`.
    pub fn he_normal(in_dim: usize, out_dim: usize, config: LinearConfig, rng: &mut RandomSource) -> Result<Self> {
        let std = (2.0 / in_dim as f64).sqrt();
        Self::new(DenseMatrix::random_normal(in_dim, out_dim, std, rng), config)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn weight(&self) -> &DenseMatrix {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut DenseMatrix {
        &mut self.weight
    }

    pub fn config(&self) -> LinearConfig {
        self.config
    }

    pub fn set_config(&mut self, config: LinearConfig) -> Result<()> {
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn reseed(&mut self, seed: u64, stream: u64) {
        self.rng = RandomSource::new(seed, stream);
    }

    pub fn cache(&self) -> &GradNormCache {
        &self.cache
    }

    pub fn cache_mut(&mut self) -> &mut GradNormCache {
        &mut self.cache
    }

    pub fn grad_weight(&self) -> Option<&DenseMatrix> {
        self.grad_weight.as_ref()
    }

    /// The sub-sampled activation kept by the last cached-mode forward pass.
    pub fn saved_activation(&self) -> Option<&SampledActivation> {
        match &self.ctx {
            Some(Context {
                saved: Saved::Sampled(a),
                ..
            }) => Some(a),
            _ => None,
        }
    }

    /// Number of activation entries held for the backward pass.
    pub fn stored_elements(&self) -> usize {
        match &self.ctx {
            None => 0,
            Some(c) => match &c.saved {
                Saved::Full(h) => h.rows() * h.cols(),
                Saved::Sampled(a) => a.rows.rows() * a.rows.cols(),
            },
        }
    }

    fn sampled(&self) -> bool {
        self.config.mode != EstimatorKind::Exact
    }

    /// Exact `Z = H W`. `row_examples[r]` names the dataset example that row
    /// `r` belongs to.
    pub fn forward(&mut self, h: &DenseMatrix, row_examples: &[usize]) -> Result<DenseMatrix> {
        if row_examples.len() != h.rows() {
            return Err(Error::Shape {
                op: "linear_forward ids",
                left: h.shape(),
                right: (row_examples.len(), 1),
            });
        }
        if h.rows() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let z = h.matmul(&self.weight)?;
        let saved = if self.sampled() && self.config.sampling == SamplingMode::Cached {
            let norms: Vec<f64> = row_examples
                .iter()
                .map(|&e| self.cache.get(e).unwrap_or(1.0))
                .collect();
            let k = self.config.budget_rows(h.rows());
            Saved::Sampled(sample_with_fallback(self.config.mode, h, &norms, k, &mut self.rng)?)
        } else {
            Saved::Full(h.clone())
        };
        self.ctx = Some(Context {
            saved,
            row_examples: row_examples.to_vec(),
        });
        Ok(z)
    }

    /// Returns `(∇H, ∇W)` and records the per-example gradient norms. May be
    /// called repeatedly after one forward; oracle mode resamples each time.
    pub fn backward(&mut self, grad_z: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
        let ctx = self
            .ctx
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        if grad_z.rows() != ctx.row_examples.len() || grad_z.cols() != self.out_dim() {
            return Err(Error::Shape {
                op: "linear_backward",
                left: (ctx.row_examples.len(), self.out_dim()),
                right: grad_z.shape(),
            });
        }
        let grad_h = grad_z.matmul_t(&self.weight)?;
        let grad_w = match &ctx.saved {
            Saved::Full(h) if !self.sampled() => h.t_matmul(grad_z)?,
            Saved::Full(h) => {
                let k = self.config.budget_rows(h.rows());
                let act = sample_with_fallback(self.config.mode, h, &grad_z.row_norms(), k, &mut self.rng)?;
                weight_grad(&act, grad_z, h.cols())?
            }
            Saved::Sampled(act) => weight_grad(act, grad_z, self.in_dim())?,
        };

        let mut sq: Vec<(usize, f64)> = Vec::new();
        for (r, &e) in ctx.row_examples.iter().enumerate() {
            let s: f64 = grad_z.row(r).iter().map(|v| v * v).sum();
            match sq.last_mut() {
                Some((last, acc)) if *last == e => *acc += s,
                _ => sq.push((e, s)),
            }
        }
        for (e, s) in sq {
            self.cache.set(e, s.sqrt());
        }

        self.grad_weight = Some(grad_w.clone());
        Ok((grad_h, grad_w))
    }

    /// `W ← W - lr · ∇W` using the last computed gradient.
    pub fn sgd_step(&mut self, lr: f64) -> Result<()> {
        match &self.grad_weight {
            Some(g) => self.weight.axpy(-lr, g),
            None => Err(Error::State("no gradient to apply".into())),
        }
    }
}

fn weight_grad(act: &SampledActivation, grad_z: &DenseMatrix, in_dim: usize) -> Result<DenseMatrix> {
    if act.is_empty() {
        return Ok(DenseMatrix::zeros(in_dim, grad_z.cols()));
    }
    if act.kept_indices.len() == grad_z.rows() && act.kept_indices.iter().enumerate().all(|(i, &j)| i == j) {
        return act.rows.t_matmul(grad_z);
    }
    act.rows.t_matmul(&grad_z.select_rows(&act.kept_indices))
}

// With every cached norm zero, fall back to activation norms alone; with
// every activation row zero the weight gradient is exactly zero.
fn sample_with_fallback(
    kind: EstimatorKind,
    h: &DenseMatrix,
    norms: &[f64],
    k: usize,
    rng: &mut RandomSource,
) -> Result<SampledActivation> {
    match subsample_with(kind, h, norms, k, rng) {
        Err(Error::Degenerate(_)) => match subsample_with(kind, h, &vec![1.0; h.rows()], k, rng) {
            Err(Error::Degenerate(_)) => Ok(SampledActivation::empty(h.cols())),
            other => other,
        },
        other => other,
    }
}
