//! Tridiagonal numerical core: differencing/precision assembly, LDL^T
//! solves and log-determinants, the marginalized likelihood term, and the
//! rank-one Woodbury Metropolis ratio with per-dimension caches.
//!
//! The precision of the marginalized latent path for one climate dimension
//! is `P = D + W` where `D = diag(tau_i)` holds the active mixture-component
//! precisions and `W = sum_i v_i^{-1} z_i z_i^T` is the random-walk precision
//! built from the squared volatilities (`z_i` has +1 at slot i, -1 at slot
//! i+1). `P` is symmetric tridiagonal, so everything here is O(n).

mod dense;
mod state;

pub use dense::DenseOracle;
pub use state::MarginalState;

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix with a lazily computed LDL^T factorization.
#[derive(Debug, Clone)]
pub struct TriDiagPrecision {
    diag: Vec<f64>,
    off: Vec<f64>,
    factor: std::cell::OnceCell<LdlFactor>,
}

impl TriDiagPrecision {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("empty diagonal".into()));
        }
        if off.len() + 1 != n && !(n == 1 && off.is_empty()) {
            return Err(Error::DimensionMismatch(format!(
                "off-diagonal length {} does not match size {}",
                off.len(),
                n
            )));
        }
        if diag.iter().chain(off.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite matrix entry"));
        }
        Ok(Self {
            diag,
            off,
            factor: std::cell::OnceCell::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.off
    }

    /// The LDL^T factorization, computed on first use.
    pub fn factor(&self) -> Result<&LdlFactor> {
        if self.factor.get().is_none() {
            let f = LdlFactor::of(&self.diag, &self.off)?;
            let _ = self.factor.set(f);
        }
        Ok(self.factor.get().expect("just set"))
    }

    /// Solve `P x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.factor()?.solve_in_place(&mut x);
        Ok(x)
    }

    /// log det P (sum of log pivots).
    pub fn logdet(&self) -> Result<f64> {
        Ok(self.factor()?.logdet())
    }

    /// Multiply `P y` into `out` (for residual checks).
    pub fn mul_vec(&self, y: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = self.diag[i] * y[i];
            if i > 0 {
                acc += self.off[i - 1] * y[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * y[i + 1];
            }
            out[i] = acc;
        }
    }
}

/// `P = L diag(pivot) L^T` with unit lower bidiagonal `L` (multipliers on
/// the subdiagonal). All pivots positive iff `P` is SPD.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    pivot: Vec<f64>,
    mult: Vec<f64>,
}

impl LdlFactor {
    pub fn of(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut pivot = vec![0.0; n];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        Self::fill(diag, off, &mut pivot, &mut mult, 0)?;
        Ok(Self { pivot, mult })
    }

    /// Recompute pivots and multipliers from position `start` onward,
    /// assuming entries before `start` are unchanged.
    fn fill(diag: &[f64], off: &[f64], pivot: &mut [f64], mult: &mut [f64], start: usize) -> Result<()> {
        let n = diag.len();
        for i in start..n {
            let mut d = diag[i];
            if i > 0 {
                d -= off[i - 1] * off[i - 1] / pivot[i - 1];
            }
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::NotPositiveDefinite(format!(
                    "pivot {d} at index {i}"
                )));
            }
            pivot[i] = d;
            if i + 1 < n {
                mult[i] = off[i] / d;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot.is_empty()
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.pivot, &mut self.mult)
    }

    pub fn logdet(&self) -> f64 {
        self.pivot.iter().map(|p| p.ln()).sum()
    }

    /// Solve `L diag(pivot) L^T x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.pivot.len();
        debug_assert_eq!(x.len(), n);
        for i in 1..n {
            x[i] -= self.mult[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.mult[i] * x[i + 1];
        }
    }

    /// Fill `out` with a zero-mean Gaussian draw of covariance `P^{-1}`:
    /// solve `L^T out = eps / sqrt(pivot)` with standard-normal `eps`.
    pub fn sample_zero_mean<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.pivot.len();
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            out[i] = z / self.pivot[i].sqrt();
        }
        for i in (0..n.saturating_sub(1)).rev() {
            out[i] -= self.mult[i] * out[i + 1];
        }
    }
}

/// Build `D + W` from component precisions `tau` and volatilities `v`.
///
/// `diag[i] = tau_i + 1/v_{i-1} + 1/v_i` (boundary terms omitted at the
/// ends), `off[i] = -1/v_i`. `W` alone is singular with null vector 1, so
/// every `tau_i` must be strictly positive for the result to be SPD.
pub fn assemble(tau: &[f64], v: &[f64]) -> Result<TriDiagPrecision> {
    let n = tau.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty precision diagonal".into()));
    }
    if v.len() + 1 != n && !(n == 1 && v.is_empty()) {
        return Err(Error::DimensionMismatch(format!(
            "volatility length {} does not match {} layers",
            v.len(),
            n
        )));
    }
    if tau.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::invalid(
            "all component precisions must be strictly positive",
        ));
    }
    if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::invalid("all volatilities must be strictly positive"));
    }
    let mut diag = tau.to_vec();
    let mut off = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let w = 1.0 / v[i];
        diag[i] += w;
        diag[i + 1] += w;
        off[i] = -w;
    }
    TriDiagPrecision::new(diag, off)
}

/// The marginalized likelihood term for one climate dimension:
/// `log N(0; mu, D^{-1}) - log N(0; V D mu, V)` with `V = (D + W)^{-1}`,
/// computed through one tridiagonal solve and two log-determinants.
pub fn marginal_logterm(mu: &[f64], tau: &[f64], v: &[f64]) -> Result<f64> {
    if mu.len() != tau.len() {
        return Err(Error::DimensionMismatch(format!(
            "mu length {} vs tau length {}",
            mu.len(),
            tau.len()
        )));
    }
    let prec = assemble(tau, v)?;
    let dmu: Vec<f64> = mu.iter().zip(tau).map(|(m, t)| m * t).collect();
    let w = prec.solve(&dmu)?;
    let logdet_d: f64 = tau.iter().map(|t| t.ln()).sum();
    let mu_d_mu: f64 = mu.iter().zip(&dmu).map(|(m, dm)| m * dm).sum();
    let quad: f64 = dmu.iter().zip(&w).map(|(a, b)| a * b).sum();
    Ok(0.5 * (logdet_d - mu_d_mu - prec.logdet()? + quad))
}
