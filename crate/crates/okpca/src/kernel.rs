//! Kernel-function evaluation. The only place the kernel family and width
//! parameter are interpreted; everything else works through inner products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel family. Only the Gaussian RBF is used; the enum leaves room for
/// extension without an API change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    GaussianRbf,
}

/// A kernel function `k(x, y)` together with its width parameter.
///
/// For the Gaussian RBF, `k(x, y) = exp(-||x - y||^2 / mu)`, so `mu` has the
/// units of a squared state norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub mu: f64,
}

impl KernelSpec {
    pub fn gaussian(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidKernelWidth(mu));
        }
        Ok(KernelSpec {
            family: KernelFamily::GaussianRbf,
            mu,
        })
    }

    /// Evaluate `k(x, y)`. Both vectors must share a dimension.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluate without the dimension check. Hot path for quadrature loops
    /// where dimensions were validated once per trajectory pair.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let mut sq = 0.0;
        for (a, b) in x.iter().zip(y) {
            let d = a - b;
            sq += d * d;
        }
        (-sq / self.mu).exp()
    }

    /// Sum of `w[j] * k(x, ys[j])` over a flat row-major grid of points.
    /// This is the inner loop of every occupation-kernel quadrature.
    #[inline]
    pub fn weighted_sum(&self, x: &[f64], ys: &[f64], weights: &[f64]) -> f64 {
        let n = x.len();
        debug_assert_eq!(ys.len(), weights.len() * n);
        let inv_mu = -1.0 / self.mu;
        let mut acc = 0.0;
        match n {
            1 => {
                for (y, w) in ys.iter().zip(weights) {
                    let d = x[0] - y;
                    acc += w * (inv_mu * d * d).exp();
                }
            }
            2 => {
                let (x0, x1) = (x[0], x[1]);
                for (y, w) in ys.chunks_exact(2).zip(weights) {
                    let d0 = x0 - y[0];
                    let d1 = x1 - y[1];
                    acc += w * (inv_mu * (d0 * d0 + d1 * d1)).exp();
                }
            }
            _ => {
                for (y, w) in ys.chunks_exact(n).zip(weights) {
                    let mut sq = 0.0;
                    for (a, b) in x.iter().zip(y) {
                        let d = a - b;
                        sq += d * d;
                    }
                    acc += w * (inv_mu * sq).exp();
                }
            }
        }
        acc
    }
}
