use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

pub fn relu_forward(z: &DenseMatrix) -> DenseMatrix {
    z.map(|v| v.max(0.0))
}

/// Passes `grad_h` where `z > 0`, zero elsewhere.
pub fn relu_backward(z: &DenseMatrix, grad_h: &DenseMatrix) -> Result<DenseMatrix> {
    let mask = z.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    mask.hadamard(grad_h)
}

/// Exact GELU, `z · Φ(z)`.
pub fn gelu_forward(z: &DenseMatrix) -> DenseMatrix {
    z.map(|v| 0.5 * v * (1.0 + libm::erf(v * FRAC_1_SQRT_2)))
}

/// `d/dz [z Φ(z)] = Φ(z) + z φ(z)`.
pub fn gelu_backward(z: &DenseMatrix, grad_h: &DenseMatrix) -> Result<DenseMatrix> {
    if z.shape() != grad_h.shape() {
        return Err(Error::Shape {
            op: "gelu_backward",
            left: z.shape(),
            right: grad_h.shape(),
        });
    }
    let inv_sqrt_2pi = 1.0 / (2.0 * PI).sqrt();
    let d = z.map(|v| {
        let cdf = 0.5 * (1.0 + libm::erf(v * FRAC_1_SQRT_2));
        cdf + v * inv_sqrt_2pi * (-0.5 * v * v).exp()
    });
    d.hadamard(grad_h)
}
