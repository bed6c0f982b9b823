use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Allowed deviation of a probability vector's sum from one.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Seeded random stream identified by `(seed, stream)`.
///
/// Equal pairs give equal sequences; distinct stream ids select
/// non-overlapping ChaCha streams under the same key. Single consumer.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.rng);
    }
}

/// Mixes two words into a fresh 64-bit seed (splitmix64 finaliser).
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse-CDF sampler over a fixed set of weights.
#[derive(Clone, Debug)]
pub struct Categorical {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Categorical {
    /// Weights need not be normalised; they must be finite, non-negative and
    /// not all zero.
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Degenerate("empty distribution".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and non-negative".into(),
            ));
        }
        let last_positive = weights
            .iter()
            .rposition(|&w| w > 0.0)
            .ok_or_else(|| Error::Degenerate("all-zero distribution".into()))?;
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            cumulative,
            last_positive,
        })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn sample(&self, rng: &mut RandomSource) -> usize {
        let total = self.cumulative[self.cumulative.len() - 1];
        let u = rng.uniform() * total;
        // First index whose cumulative weight exceeds u; zero-weight atoms
        // share their predecessor's cumulative value and are never selected.
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.last_positive)
    }
}

/// Draws `count` indices i.i.d. from the probability vector `probs`, which
/// must sum to one within [`PROB_TOLERANCE`].
pub fn categorical_sample(probs: &[f64], count: usize, rng: &mut RandomSource) -> Result<Vec<usize>> {
    let sampler = Categorical::new(probs)?;
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    Ok((0..count).map(|_| sampler.sample(rng)).collect())
}
