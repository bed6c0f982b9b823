use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, RandomSource};

/// Labelled examples, each made of `rows_per_example` consecutive input rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: DenseMatrix,
    pub labels: Vec<usize>,
    pub rows_per_example: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Inputs, per-row example ids and labels for the listed examples.
    pub fn batch(&self, examples: &[usize]) -> (DenseMatrix, Vec<usize>, Vec<usize>) {
        let r = self.rows_per_example;
        let rows: Vec<usize> = examples.iter().flat_map(|&e| e * r..(e + 1) * r).collect();
        let ids = examples.iter().flat_map(|&e| std::iter::repeat(e).take(r)).collect();
        let labels = examples.iter().map(|&e| self.labels[e]).collect();
        (self.inputs.select_rows(&rows), ids, labels)
    }

    fn subset(&self, examples: &[usize]) -> Dataset {
        let (inputs, _, labels) = self.batch(examples);
        Dataset {
            inputs,
            labels,
            rows_per_example: self.rows_per_example,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitTask {
    pub train: Dataset,
    pub val: Dataset,
    pub classes: usize,
}

// Per-class split, so both halves keep the class balance.
fn stratified_split(all: &Dataset, classes: usize, val_fraction: f64, rng: &mut RandomSource) -> Result<SplitTask> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {val_fraction} outside (0, 1)"
        )));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..all.len()).filter(|&e| all.labels[e] == c).collect();
        rng.shuffle(&mut members);
        let n_val = ((members.len() as f64 * val_fraction).round() as usize).clamp(1, members.len().saturating_sub(1).max(1));
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("too few examples to split".into()));
    }
    Ok(SplitTask {
        train: all.subset(&train),
        val: all.subset(&val),
        classes,
    })
}

/// `examples` points in `dim` dimensions, labels assigned round-robin over
/// `classes`. Each class is a mixture of `blobs` Gaussian blobs, visited in
/// turn; blob centres are Gaussian with standard deviation `separation` and
/// points add unit Gaussian noise.
pub fn gaussian_clusters(
    examples: usize,
    dim: usize,
    classes: usize,
    blobs: usize,
    separation: f64,
    val_fraction: f64,
    seed: u64,
) -> Result<SplitTask> {
    if classes < 2 || blobs == 0 || examples < 2 * classes || dim == 0 {
        return Err(Error::InvalidArgument(
            "gaussian-clusters needs classes >= 2, blobs >= 1, dim >= 1 and two examples per class".into(),
        ));
    }
    let mut rng = RandomSource::new(seed, 0);
    let centres = DenseMatrix::random_normal(classes * blobs, dim, separation, &mut rng);
    let labels: Vec<usize> = (0..examples).map(|e| e % classes).collect();
    let blob = |e: usize| labels[e] * blobs + (e / classes) % blobs;
    let inputs = DenseMatrix::from_fn(examples, dim, |e, c| centres.get(blob(e), c) + rng.standard_normal());
    let all = Dataset {
        inputs,
        labels,
        rows_per_example: 1,
    };
    stratified_split(&all, classes, val_fraction, &mut RandomSource::new(seed, 1))
}

/// Length-`seq_len` sequences over two tokens, one-hot encoded with additive
/// Gaussian `noise`; the label is the majority token. Labels alternate and the
/// majority count is uniform over `⌈seq_len/2⌉..=seq_len`.
pub fn majority_token(examples: usize, seq_len: usize, noise: f64, val_fraction: f64, seed: u64) -> Result<SplitTask> {
    if seq_len % 2 == 0 || examples < 4 {
        return Err(Error::InvalidArgument(
            "majority-token needs an odd sequence length and at least four examples".into(),
        ));
    }
    let mut rng = RandomSource::new(seed, 0);
    let labels: Vec<usize> = (0..examples).map(|e| e % 2).collect();
    let mut inputs = DenseMatrix::zeros(examples * seq_len, 2);
    let lo = seq_len.div_ceil(2);
    for (e, &label) in labels.iter().enumerate() {
        let majority = lo + rng.below(seq_len - lo + 1);
        let mut tokens: Vec<usize> = (0..seq_len).map(|i| if i < majority { label } else { 1 - label }).collect();
        rng.shuffle(&mut tokens);
        for (i, &t) in tokens.iter().enumerate() {
            let r = e * seq_len + i;
            inputs.set(r, t, 1.0);
            for c in 0..2 {
                let v = inputs.get(r, c) + noise * rng.standard_normal();
                inputs.set(r, c, v);
            }
        }
    }
    let all = Dataset {
        inputs,
        labels,
        rows_per_example: seq_len,
    };
    stratified_split(&all, 2, val_fraction, &mut RandomSource::new(seed, 1))
}
