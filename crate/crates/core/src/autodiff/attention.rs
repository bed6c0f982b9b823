use super::linear::{LinearConfig, LinearLayer};
use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, RandomSource};

#[derive(Clone, Debug)]
struct Saved {
    q: DenseMatrix,
    k: DenseMatrix,
    v: DenseMatrix,
    probs: Vec<DenseMatrix>,
}

/// Single-head self-attention over consecutive blocks of `seq_len` rows.
///
/// `out = softmax(Q Kᵀ / √d) V · W_o` per sequence, with `Q`, `K`, `V` and the
/// output projection all [`LinearLayer`]s.
#[derive(Clone, Debug)]
pub struct AttentionBlock {
    query: LinearLayer,
    key: LinearLayer,
    value: LinearLayer,
    output: LinearLayer,
    seq_len: usize,
    saved: Option<Saved>,
}

impl AttentionBlock {
    pub fn new(dim: usize, seq_len: usize, config: LinearConfig, rng: &mut RandomSource) -> Result<Self> {
        if seq_len == 0 || dim == 0 {
            return Err(Error::InvalidArgument("attention needs dim > 0 and seq_len > 0".into()));
        }
        let std = 1.0 / (dim as f64).sqrt();
        let mut proj = || LinearLayer::new(DenseMatrix::random_normal(dim, dim, std, rng), config);
        Ok(Self {
            query: proj()?,
            key: proj()?,
            value: proj()?,
            output: proj()?,
            seq_len,
            saved: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.query.in_dim()
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    /// Query, key, value and output projections, in that order.
    pub fn projections(&self) -> [&LinearLayer; 4] {
        [&self.query, &self.key, &self.value, &self.output]
    }

    pub fn projections_mut(&mut self) -> [&mut LinearLayer; 4] {
        [&mut self.query, &mut self.key, &mut self.value, &mut self.output]
    }

    fn check_rows(&self, h: &DenseMatrix) -> Result<usize> {
        if h.rows() == 0 || h.rows() % self.seq_len != 0 || h.cols() != self.dim() {
            return Err(Error::Shape {
                op: "attention",
                left: (self.seq_len, self.dim()),
                right: h.shape(),
            });
        }
        Ok(h.rows() / self.seq_len)
    }

    fn mix(&self, q: &DenseMatrix, k: &DenseMatrix, v: &DenseMatrix, batches: usize) -> Result<(DenseMatrix, Vec<DenseMatrix>)> {
        let scale = 1.0 / (self.dim() as f64).sqrt();
        let s = self.seq_len;
        let mut probs = Vec::with_capacity(batches);
        let mut parts = Vec::with_capacity(batches);
        for b in 0..batches {
            let (lo, hi) = (b * s, (b + 1) * s);
            let kb = k.row_block(lo, hi);
            let mut a = q.row_block(lo, hi).matmul_t(&kb)?.scale(scale);
            softmax_rows(&mut a);
            parts.push(a.matmul(&v.row_block(lo, hi))?);
            probs.push(a);
        }
        Ok((DenseMatrix::vstack(&parts)?, probs))
    }

    /// Stateless forward pass.
    pub fn infer(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        let batches = self.check_rows(h)?;
        let q = h.matmul(self.query.weight())?;
        let k = h.matmul(self.key.weight())?;
        let v = h.matmul(self.value.weight())?;
        let (ctx, _) = self.mix(&q, &k, &v, batches)?;
        ctx.matmul(self.output.weight())
    }

    pub fn forward(&mut self, h: &DenseMatrix, row_examples: &[usize]) -> Result<DenseMatrix> {
        let batches = self.check_rows(h)?;
        let q = self.query.forward(h, row_examples)?;
        let k = self.key.forward(h, row_examples)?;
        let v = self.value.forward(h, row_examples)?;
        let (ctx, probs) = self.mix(&q, &k, &v, batches)?;
        let out = self.output.forward(&ctx, row_examples)?;
        self.saved = Some(Saved { q, k, v, probs });
        Ok(out)
    }

    /// Gradient with respect to the block input; weight gradients are kept
    /// on the projections.
    pub fn backward(&mut self, grad_out: &DenseMatrix) -> Result<DenseMatrix> {
        let saved = self
            .saved
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let (grad_ctx, _) = self.output.backward(grad_out)?;
        let scale = 1.0 / (self.dim() as f64).sqrt();
        let s = self.seq_len;
        let (mut gq, mut gk, mut gv) = (Vec::new(), Vec::new(), Vec::new());
        for (b, a) in saved.probs.iter().enumerate() {
            let (lo, hi) = (b * s, (b + 1) * s);
            let gc = grad_ctx.row_block(lo, hi);
            let vb = saved.v.row_block(lo, hi);
            let ga = gc.matmul_t(&vb)?;
            gv.push(a.t_matmul(&gc)?);
            let mut gs = DenseMatrix::zeros(s, s);
            for i in 0..s {
                let dot: f64 = a.row(i).iter().zip(ga.row(i)).map(|(p, g)| p * g).sum();
                for j in 0..s {
                    gs.set(i, j, a.get(i, j) * (ga.get(i, j) - dot) * scale);
                }
            }
            gq.push(gs.matmul(&saved.k.row_block(lo, hi))?);
            gk.push(gs.t_matmul(&saved.q.row_block(lo, hi))?);
        }
        let (hq, _) = self.query.backward(&DenseMatrix::vstack(&gq)?)?;
        let (hk, _) = self.key.backward(&DenseMatrix::vstack(&gk)?)?;
        let (hv, _) = self.value.backward(&DenseMatrix::vstack(&gv)?)?;
        hq.add(&hk)?.add(&hv)
    }
}

pub(crate) fn softmax_rows(m: &mut DenseMatrix) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind;

    fn block(config: LinearConfig) -> AttentionBlock {
        AttentionBlock::new(4, 3, config, &mut RandomSource::new(7, 0)).unwrap()
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut m = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [1000.0, 1000.0, -1000.0]]).unwrap();
        softmax_rows(&mut m);
        for r in 0..2 {
            assert!((m.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((m.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infer_matches_forward() {
        let h = DenseMatrix::random_normal(6, 4, 1.0, &mut RandomSource::new(1, 0));
        let mut b = block(LinearConfig::sampled(EstimatorKind::WtaCrs, 0.5));
        let ids = [0, 0, 0, 1, 1, 1];
        assert_eq!(b.infer(&h).unwrap(), b.forward(&h, &ids).unwrap());
    }

    #[test]
    fn sequences_do_not_interact() {
        let mut rng = RandomSource::new(2, 0);
        let h = DenseMatrix::random_normal(6, 4, 1.0, &mut rng);
        let b = block(LinearConfig::exact());
        let full = b.infer(&h).unwrap();
        let first = b.infer(&h.row_block(0, 3)).unwrap();
        assert!(full.row_block(0, 3).max_abs_diff(&first).unwrap() < 1e-12);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let h = DenseMatrix::random_normal(6, 4, 1.0, &mut RandomSource::new(3, 0));
        let g = DenseMatrix::random_normal(6, 4, 1.0, &mut RandomSource::new(4, 0));
        let mut b = block(LinearConfig::exact());
        b.forward(&h, &[0, 0, 0, 1, 1, 1]).unwrap();
        let gh = b.backward(&g).unwrap();
        let objective = |x: &DenseMatrix| -> f64 {
            b.infer(x).unwrap().hadamard(&g).unwrap().data().iter().sum()
        };
        let eps = 1e-6;
        for i in 0..h.data().len() {
            let mut plus = h.clone();
            plus.data_mut()[i] += eps;
            let mut minus = h.clone();
            minus.data_mut()[i] -= eps;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * eps);
            assert!((fd - gh.data()[i]).abs() < 1e-6 * (1.0 + fd.abs()), "entry {i}");
        }
    }

    #[test]
    fn rejects_ragged_batches() {
        let mut b = block(LinearConfig::exact());
        assert!(b.forward(&DenseMatrix::zeros(5, 4), &[0; 5]).is_err());
        assert!(matches!(b.backward(&DenseMatrix::zeros(3, 4)), Err(Error::State(_))));
    }
}
