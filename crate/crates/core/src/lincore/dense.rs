//! Full-matrix reference computations for testing the tridiagonal path.
//! Deliberately naive O(n^3) dense Cholesky; guarded to n <= 200.

use crate::error::{Error, Result};

/// Dense mirror of the per-dimension marginal computation.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    mu: Vec<f64>,
    tau: Vec<f64>,
    chol: Vec<Vec<f64>>, // lower Cholesky factor of D + W
}

impl DenseOracle {
    pub fn new(mu: &[f64], tau: &[f64], v: &[f64]) -> Result<Self> {
        let n = tau.len();
        if n > 200 {
            return Err(Error::DimensionMismatch(format!(
                "dense oracle limited to n <= 200, got {n}"
            )));
        }
        let p = Self::build_precision(tau, v);
        let chol = cholesky(&p)?;
        Ok(Self {
            mu: mu.to_vec(),
            tau: tau.to_vec(),
            chol,
        })
    }

    /// `D + B^T diag(1/v) B` built densely from the difference-matrix rows.
    pub fn build_precision(tau: &[f64], v: &[f64]) -> Vec<Vec<f64>> {
        let n = tau.len();
        let mut p = vec![vec![0.0; n]; n];
        for i in 0..n {
            p[i][i] = tau[i];
        }
        for (i, &vi) in v.iter().enumerate() {
            // z_i has +1 at i, -1 at i+1; add z_i z_i^T / v_i
            let w = 1.0 / vi;
            p[i][i] += w;
            p[i + 1][i + 1] += w;
            p[i][i + 1] -= w;
            p[i + 1][i] -= w;
        }
        p
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        chol_solve(&self.chol, rhs)
    }

    pub fn logdet(&self) -> f64 {
        2.0 * self.chol.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<f64>()
    }

    /// Entry (i, j) of V = (D + W)^{-1}.
    pub fn v_entry(&self, i: usize, j: usize) -> f64 {
        let n = self.tau.len();
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        self.solve(&e)[i]
    }

    /// log N(0; mu, D^{-1}) - log N(0; V D mu, V), all dense.
    pub fn marginal_logterm(&self) -> f64 {
        let n = self.tau.len();
        let dmu: Vec<f64> = self.mu.iter().zip(&self.tau).map(|(m, t)| m * t).collect();
        let w = self.solve(&dmu);
        let logdet_d: f64 = self.tau.iter().map(|t| t.ln()).sum();
        let mu_d_mu: f64 = self.mu.iter().zip(&dmu).map(|(m, d)| m * d).sum();
        let quad: f64 = dmu.iter().zip(&w).map(|(a, b)| a * b).sum();
        let _ = n;
        0.5 * (logdet_d - mu_d_mu - self.logdet() + quad)
    }

    /// log [ N(0; V D mu, V) / N(0; V* D mu, V*) ] where V* swaps v_i for
    /// v_new, computed densely from scratch.
    pub fn woodbury_log_ratio(
        mu: &[f64],
        tau: &[f64],
        v: &[f64],
        i: usize,
        v_new: f64,
    ) -> Result<f64> {
        let old = Self::new(mu, tau, v)?;
        let mut v2 = v.to_vec();
        v2[i] = v_new;
        let new = Self::new(mu, tau, &v2)?;
        // the ratio equals the difference of the marginal terms with the
        // D-only pieces cancelling
        let dmu: Vec<f64> = mu.iter().zip(tau).map(|(m, t)| m * t).collect();
        let quad_old: f64 = dmu.iter().zip(old.solve(&dmu)).map(|(a, b)| a * b).sum();
        let quad_new: f64 = dmu.iter().zip(new.solve(&dmu)).map(|(a, b)| a * b).sum();
        // log N(0; V D mu, V) = -(n/2) log 2pi + 1/2 log|P| - 1/2 (D mu)^T V (D mu)
        Ok(0.5 * (old.logdet() - new.logdet()) - 0.5 * (quad_old - quad_new))
    }
}

fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > 0.0 && sum.is_finite()) {
                    return Err(Error::NotPositiveDefinite(format!(
                        "dense pivot {sum} at index {i}"
                    )));
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

fn chol_solve(l: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k][i] * y[k];
        }
        y[i] /= l[i][i];
    }
    y
}
