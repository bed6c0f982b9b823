use serde::{Deserialize, Serialize};

use super::activation::{gelu_backward, gelu_forward, relu_backward, relu_forward};
use super::attention::{softmax_rows, AttentionBlock};
use super::linear::{LinearConfig, LinearLayer};
use crate::error::{Error, Result};
use crate::tensor::{mix_seed, DenseMatrix, RandomSource};

#[derive(Clone, Debug)]
pub enum Layer {
    Linear(LinearLayer),
    Relu { input: Option<DenseMatrix> },
    Gelu { input: Option<DenseMatrix> },
    Attention(Box<AttentionBlock>),
    /// Averages each block of `seq_len` consecutive rows into one row.
    MeanPool { seq_len: usize },
}

impl Layer {
    pub fn relu() -> Self {
        Layer::Relu { input: None }
    }

    pub fn gelu() -> Self {
        Layer::Gelu { input: None }
    }

    fn linears(&self) -> Vec<&LinearLayer> {
        match self {
            Layer::Linear(l) => vec![l],
            Layer::Attention(a) => a.projections().to_vec(),
            _ => Vec::new(),
        }
    }

    fn linears_mut(&mut self) -> Vec<&mut LinearLayer> {
        match self {
            Layer::Linear(l) => vec![l],
            Layer::Attention(a) => a.projections_mut().into_iter().collect(),
            _ => Vec::new(),
        }
    }

    fn infer(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Layer::Linear(l) => x.matmul(l.weight()),
            Layer::Relu { .. } => Ok(relu_forward(x)),
            Layer::Gelu { .. } => Ok(gelu_forward(x)),
            Layer::Attention(a) => a.infer(x),
            Layer::MeanPool { seq_len } => mean_pool(x, *seq_len),
        }
    }

    fn forward(&mut self, x: &DenseMatrix, ids: &[usize]) -> Result<DenseMatrix> {
        match self {
            Layer::Linear(l) => l.forward(x, ids),
            Layer::Relu { input } => {
                *input = Some(x.clone());
                Ok(relu_forward(x))
            }
            Layer::Gelu { input } => {
                *input = Some(x.clone());
                Ok(gelu_forward(x))
            }
            Layer::Attention(a) => a.forward(x, ids),
            Layer::MeanPool { seq_len } => mean_pool(x, *seq_len),
        }
    }

    fn backward(&mut self, grad: &DenseMatrix) -> Result<DenseMatrix> {
        let missing = || Error::State("backward called before forward".into());
        match self {
            Layer::Linear(l) => Ok(l.backward(grad)?.0),
            Layer::Relu { input } => relu_backward(input.as_ref().ok_or_else(missing)?, grad),
            Layer::Gelu { input } => gelu_backward(input.as_ref().ok_or_else(missing)?, grad),
            Layer::Attention(a) => a.backward(grad),
            Layer::MeanPool { seq_len } => {
                let s = *seq_len;
                let inv = 1.0 / s as f64;
                Ok(DenseMatrix::from_fn(grad.rows() * s, grad.cols(), |r, c| grad.get(r / s, c) * inv))
            }
        }
    }
}

fn mean_pool(x: &DenseMatrix, seq_len: usize) -> Result<DenseMatrix> {
    if seq_len == 0 || x.rows() % seq_len != 0 {
        return Err(Error::Shape {
            op: "mean_pool",
            left: (seq_len, x.cols()),
            right: x.shape(),
        });
    }
    let inv = 1.0 / seq_len as f64;
    let mut out = DenseMatrix::zeros(x.rows() / seq_len, x.cols());
    for r in 0..x.rows() {
        let dst = r / seq_len;
        for c in 0..x.cols() {
            let v = out.get(dst, c) + x.get(r, c) * inv;
            out.set(dst, c, v);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `½ ‖o − t‖²` averaged over rows.
    MeanSquaredError,
    /// Softmax cross-entropy averaged over rows.
    SoftmaxCrossEntropy,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Values(DenseMatrix),
}

impl LossKind {
    /// Mean loss and its gradient with respect to `output`.
    pub fn loss_and_grad(self, output: &DenseMatrix, targets: &Targets) -> Result<(f64, DenseMatrix)> {
        let n = output.rows();
        if n == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let inv = 1.0 / n as f64;
        match (self, targets) {
            (LossKind::MeanSquaredError, Targets::Values(t)) => {
                let diff = output.sub(t)?;
                Ok((0.5 * inv * diff.frobenius_norm_sq(), diff.scale(inv)))
            }
            (LossKind::SoftmaxCrossEntropy, Targets::Classes(labels)) => {
                if labels.len() != n {
                    return Err(Error::Shape {
                        op: "cross_entropy",
                        left: output.shape(),
                        right: (labels.len(), 1),
                    });
                }
                let mut p = output.clone();
                softmax_rows(&mut p);
                let mut loss = 0.0;
                for (r, &y) in labels.iter().enumerate() {
                    if y >= output.cols() {
                        return Err(Error::InvalidArgument(format!(
                            "label {y} out of range for {} classes",
                            output.cols()
                        )));
                    }
                    loss -= p.get(r, y).max(f64::MIN_POSITIVE).ln();
                    p.set(r, y, p.get(r, y) - 1.0);
                }
                Ok((loss * inv, p.scale(inv)))
            }
            _ => Err(Error::InvalidArgument("targets do not match the loss kind".into())),
        }
    }
}

/// A stack of layers trained by plain SGD.
#[derive(Clone, Debug)]
pub struct Network {
    layers: Vec<Layer>,
    loss: LossKind,
    steps: usize,
}

impl Network {
    pub fn new(layers: Vec<Layer>, loss: LossKind) -> Self {
        Self { layers, loss, steps: 0 }
    }

    /// `dims[0] → dims[1] → … → dims[n]` with ReLU between linear layers.
    pub fn mlp(dims: &[usize], loss: LossKind, config: LinearConfig, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument("an MLP needs at least two widths".into()));
        }
        let mut rng = RandomSource::new(seed, u64::MAX);
        let mut layers = Vec::new();
        for (i, w) in dims.windows(2).enumerate() {
            if i > 0 {
                layers.push(Layer::relu());
            }
            layers.push(Layer::Linear(LinearLayer::he_normal(w[0], w[1], config, &mut rng)?));
        }
        let mut net = Self::new(layers, loss);
        net.reseed(seed);
        Ok(net)
    }

    /// Embed, self-attend, GELU, mean-pool over each sequence, classify.
    pub fn attention_classifier(
        in_dim: usize,
        model_dim: usize,
        seq_len: usize,
        classes: usize,
        config: LinearConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = RandomSource::new(seed, u64::MAX);
        let layers = vec![
            Layer::Linear(LinearLayer::he_normal(in_dim, model_dim, config, &mut rng)?),
            Layer::Attention(Box::new(AttentionBlock::new(model_dim, seq_len, config, &mut rng)?)),
            Layer::gelu(),
            Layer::MeanPool { seq_len },
            Layer::Linear(LinearLayer::he_normal(model_dim, classes, config, &mut rng)?),
        ];
        let mut net = Self::new(layers, LossKind::SoftmaxCrossEntropy);
        net.reseed(seed);
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// All linear layers, attention projections included, in network order.
    pub fn linear_layers(&self) -> Vec<&LinearLayer> {
        self.layers.iter().flat_map(Layer::linears).collect()
    }

    pub fn linear_layers_mut(&mut self) -> Vec<&mut LinearLayer> {
        self.layers.iter_mut().flat_map(Layer::linears_mut).collect()
    }

    pub fn set_linear_config(&mut self, config: LinearConfig) -> Result<()> {
        config.validate()?;
        for l in self.linear_layers_mut() {
            l.set_config(config)?;
        }
        Ok(())
    }

    /// Gives each linear layer its own stream under `seed`.
    pub fn reseed(&mut self, seed: u64) {
        for (i, l) in self.linear_layers_mut().into_iter().enumerate() {
            l.reseed(seed, i as u64);
        }
    }

    pub fn reseed_trial(&mut self, seed: u64, trial: u64) {
        self.reseed(mix_seed(seed, trial));
    }

    /// Stateless forward pass.
    pub fn predict(&self, input: &DenseMatrix) -> Result<DenseMatrix> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.infer(&x)?;
        }
        Ok(x)
    }

    /// Forward pass that records what the backward pass needs. `row_examples`
    /// names the example of each input row.
    pub fn forward(&mut self, input: &DenseMatrix, row_examples: &[usize]) -> Result<DenseMatrix> {
        let mut x = input.clone();
        let mut ids = row_examples.to_vec();
        for layer in &mut self.layers {
            x = layer.forward(&x, &ids)?;
            if let Layer::MeanPool { seq_len } = layer {
                ids = ids.iter().step_by(*seq_len).copied().collect();
            }
        }
        Ok(x)
    }

    /// Propagates `grad_out` back to the input, leaving weight gradients on
    /// each linear layer.
    pub fn backward(&mut self, grad_out: &DenseMatrix) -> Result<DenseMatrix> {
        let mut g = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn weight_grads(&self) -> Result<Vec<DenseMatrix>> {
        self.linear_layers()
            .into_iter()
            .map(|l| {
                l.grad_weight()
                    .cloned()
                    .ok_or_else(|| Error::State("no gradient computed".into()))
            })
            .collect()
    }

    /// One SGD step; returns the pre-update loss.
    pub fn train_step(&mut self, input: &DenseMatrix, row_examples: &[usize], targets: &Targets, lr: f64) -> Result<f64> {
        let out = self.forward(input, row_examples)?;
        let (loss, grad) = self.loss.loss_and_grad(&out, targets)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step: self.steps, loss });
        }
        self.backward(&grad)?;
        for l in self.linear_layers_mut() {
            l.sgd_step(lr)?;
        }
        self.steps += 1;
        if self.linear_layers().iter().any(|l| !l.weight().is_finite()) {
            return Err(Error::Divergence { step: self.steps, loss: f64::NAN });
        }
        Ok(loss)
    }

    pub fn evaluate(&self, input: &DenseMatrix, targets: &Targets) -> Result<f64> {
        Ok(self.loss.loss_and_grad(&self.predict(input)?, targets)?.0)
    }

    /// Fraction of rows whose arg-max output equals the label.
    pub fn accuracy(&self, input: &DenseMatrix, labels: &[usize]) -> Result<f64> {
        let out = self.predict(input)?;
        if labels.len() != out.rows() || labels.is_empty() {
            return Err(Error::Shape {
                op: "accuracy",
                left: out.shape(),
                right: (labels.len(), 1),
            });
        }
        let hits = labels
            .iter()
            .enumerate()
            .filter(|&(r, &y)| argmax(out.row(r)) == y)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
