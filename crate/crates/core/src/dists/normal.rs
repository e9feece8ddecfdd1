//! Small normal helpers: scalar log-density re-export and the bivariate
//! normal specified by its precision matrix, as needed by the drift/skew
//! Gibbs block.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

pub use crate::special::ln_normal_pdf as normal_logpdf;

/// Bivariate normal given precision matrix `P` and linear term `b`, i.e.
/// mean `P^{-1} b` and covariance `P^{-1}`.
#[derive(Debug, Clone, Copy)]
pub struct BivariateNormal {
    mean: [f64; 2],
    // lower Cholesky factor of the covariance
    chol: [f64; 3], // l11, l21, l22
}

impl BivariateNormal {
    pub fn from_precision(p: [[f64; 2]; 2], b: [f64; 2]) -> Result<Self> {
        let det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
        if !(det > 0.0 && p[0][0] > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "bivariate precision not SPD: diag=({}, {}), det={det}",
                p[0][0], p[1][1]
            )));
        }
        let mean = [
            (p[1][1] * b[0] - p[0][1] * b[1]) / det,
            (p[0][0] * b[1] - p[1][0] * b[0]) / det,
        ];
        // covariance = P^{-1}
        let c11 = p[1][1] / det;
        let c12 = -p[0][1] / det;
        let c22 = p[0][0] / det;
        let l11 = c11.sqrt();
        let l21 = c12 / l11;
        let l22 = (c22 - l21 * l21).max(0.0).sqrt();
        Ok(Self {
            mean,
            chol: [l11, l21, l22],
        })
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        [
            self.mean[0] + self.chol[0] * z1,
            self.mean[1] + self.chol[1] * z1 + self.chol[2] * z2,
        ]
    }
}
