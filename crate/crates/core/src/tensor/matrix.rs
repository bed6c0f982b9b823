use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::RandomSource;

/// Row-major matrix of `f64`.
///
/// Constructors that accept caller data reject non-finite entries. Results of
/// arithmetic on finite inputs are not re-checked.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<MatrixRepr> for DenseMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        DenseMatrix::new(r.rows, r.cols, r.data)
    }
}

impl From<DenseMatrix> for MatrixRepr {
    fn from(m: DenseMatrix) -> Self {
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from nested rows. All rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape {
                    op: "from_rows",
                    left: (i, r.len()),
                    right: (i, cols),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec_unchecked(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::from_vec_unchecked(rows, cols, data)
    }

    /// Entries drawn i.i.d. from N(0, std²).
    pub fn random_normal(rows: usize, cols: usize, std: f64, rng: &mut RandomSource) -> Self {
        Self::from_fn(rows, cols, |_, _| std * rng.standard_normal())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Exact product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (t, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(t)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materialising the transpose.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Shape {
                op: "t_matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for t in 0..self.rows {
            let b_row = other.row(t);
            for (i, &a) in self.row(t).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape {
                op: "matmul_t",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self::from_fn(self.rows, other.rows, |i, j| {
            self.row(i).iter().zip(other.row(j)).map(|(a, b)| a * b).sum()
        }))
    }

    /// Outer product of column `col` of `self` and row `row` of `other`.
    pub fn outer(&self, col: usize, other: &Self, row: usize) -> Self {
        let y = other.row(row);
        Self::from_fn(self.rows, other.cols, |r, c| self.get(r, col) * y[c])
    }

    /// Euclidean norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, v) in sq.iter_mut().zip(self.row(r)) {
                *s += v * v;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Squared Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_shape("frobenius_distance", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape("max_abs_diff", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with("hadamard", other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_same_shape("axpy", other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// New matrix made of the given rows, in order. Repeats are allowed.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_vec_unchecked(indices.len(), self.cols, data)
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        Self::from_vec_unchecked(
            end - start,
            self.cols,
            self.data[start * self.cols..end * self.cols].to_vec(),
        )
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn vstack(parts: &[Self]) -> Result<Self> {
        let cols = parts.first().map_or(0, |p| p.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(Error::Shape {
                    op: "vstack",
                    left: (rows, cols),
                    right: p.shape(),
                });
            }
            rows += p.rows;
            data.extend_from_slice(&p.data);
        }
        Ok(Self::from_vec_unchecked(rows, cols, data))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, op: &'static str, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, op: &'static str, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(op, other)?;
        Ok(Self::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(x.rows(), y.cols());
        for i in 0..x.rows() {
            for j in 0..y.cols() {
                let mut s = 0.0;
                for t in 0..x.cols() {
                    s += x.get(i, t) * y.get(t, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn identity_products() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(i2.matmul(&i2).unwrap(), i2);
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(a.matmul(&i2).unwrap(), a);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = RandomSource::new(7, 0);
        let x = DenseMatrix::random_normal(5, 7, 1.0, &mut rng);
        let y = DenseMatrix::random_normal(7, 3, 1.0, &mut rng);
        let got = x.matmul(&y).unwrap();
        assert!(got.max_abs_diff(&naive_matmul(&x, &y)).unwrap() < 1e-12);
        let tt = x.transpose().t_matmul(&y).unwrap();
        assert!(tt.max_abs_diff(&got).unwrap() < 1e-12);
        let nt = x.matmul_t(&y.transpose()).unwrap();
        assert!(nt.max_abs_diff(&got).unwrap() < 1e-12);
    }

    #[test]
    fn matmul_shape_error() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::Shape { .. })));
    }

    #[test]
    fn construction_rejects_bad_data() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(Error::DataLength { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(DenseMatrix::identity(2).column_norms(), vec![1.0, 1.0]);
        let m = DenseMatrix::from_rows(&[[3.0, 0.0], [4.0, 0.0]]).unwrap();
        assert_eq!(m.column_norms(), vec![5.0, 0.0]);

        let mut rng = RandomSource::new(3, 1);
        let y = DenseMatrix::random_normal(4, 6, 1.0, &mut rng);
        for (r, n) in y.row_norms().iter().enumerate() {
            let oracle = y.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - oracle).abs() < 1e-15);
        }
    }

    #[test]
    fn frobenius_distance_cases() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let b = DenseMatrix::zeros(1, 2);
        assert_eq!(a.frobenius_distance(&a).unwrap(), 0.0);
        assert_eq!(a.frobenius_distance(&b).unwrap(), 1.0);
        assert!(a.frobenius_distance(&DenseMatrix::zeros(2, 1)).is_err());

        let mut rng = RandomSource::new(11, 0);
        let x = DenseMatrix::random_normal(3, 4, 1.0, &mut rng);
        let y = DenseMatrix::random_normal(3, 4, 1.0, &mut rng);
        let mut oracle = 0.0;
        for r in 0..3 {
            for c in 0..4 {
                oracle += (x.get(r, c) - y.get(r, c)).powi(2);
            }
        }
        assert!((x.frobenius_distance(&y).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn serde_rejects_non_matching_length() {
        let bad = r#"{"rows":2,"cols":2,"data":[1.0]}"#;
        assert!(serde_json::from_str::<DenseMatrix>(bad).is_err());
        let good = r#"{"rows":1,"cols":2,"data":[1.0,2.0]}"#;
        let m: DenseMatrix = serde_json::from_str(good).unwrap();
        assert_eq!(m.shape(), (1, 2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
            proptest::collection::vec(-10.0f64..10.0, rows * cols)
                .prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
        }

        proptest! {
            #[test]
            fn matmul_agrees_with_oracle(
                (x, y) in (1usize..64, 1usize..64, 1usize..64)
                    .prop_flat_map(|(n, m, q)| (matrix(n, m), matrix(m, q)))
            ) {
                let got = x.matmul(&y).unwrap();
                let want = naive_matmul(&x, &y);
                let scale = 1.0 + want.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
                prop_assert!(got.max_abs_diff(&want).unwrap() <= 1e-12 * scale);
            }

            #[test]
            fn frobenius_zero_iff_equal(a in matrix(3, 3), b in matrix(3, 3)) {
                prop_assert_eq!(a.frobenius_distance(&a).unwrap(), 0.0);
                let d = a.frobenius_distance(&b).unwrap();
                prop_assert_eq!(d == 0.0, a == b);
            }
        }
    }
}
