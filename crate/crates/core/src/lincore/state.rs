//! Cached per-dimension state for the marginalized posterior: the assembled
//! tridiagonal precision, its LDL^T factor, and the solve `w = V D mu`
//! reused across Metropolis proposals.
//!
//! A proposal costs one tridiagonal solve (for `V z_i`); an acceptance
//! commits the rank-one update to the caches: pivots are refilled from the
//! touched index (exact) and `w` is corrected by the Woodbury rank-one
//! formula, with a full refresh every `n` acceptances to bound drift.

use super::LdlFactor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Pending {
    index: usize,
    v_new: f64,
    delta: f64, // 1/v_new - 1/v_old
    s: f64,     // z^T V z
    r: f64,     // z^T V D mu
}

#[derive(Debug, Clone)]
pub struct MarginalState {
    n: usize,
    mu: Vec<f64>,
    tau: Vec<f64>,
    dmu: Vec<f64>,
    v: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    factor: LdlFactor,
    w: Vec<f64>, // V D mu
    logdet_d: f64,
    mu_d_mu: f64,
    accepts_since_refresh: usize,
    pending: Option<Pending>,
    // proposal scratch (kept across proposals to avoid hot-path allocation)
    vz: Vec<f64>,
    scratch_diag: Vec<f64>,
    scratch_pivot: Vec<f64>,
    scratch_mult: Vec<f64>,
    scratch_rhs: Vec<f64>,
}

impl MarginalState {
    pub fn new(mu: Vec<f64>, tau: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let n = mu.len();
        if tau.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "mu length {n} vs tau length {}",
                tau.len()
            )));
        }
        let prec = super::assemble(&tau, &v)?;
        let diag = prec.diag().to_vec();
        let off = prec.offdiag().to_vec();
        let factor = LdlFactor::of(&diag, &off)?;
        let dmu: Vec<f64> = mu.iter().zip(&tau).map(|(m, t)| m * t).collect();
        let mut w = dmu.clone();
        factor.solve_in_place(&mut w);
        let logdet_d = tau.iter().map(|t| t.ln()).sum();
        let mu_d_mu = mu.iter().zip(&dmu).map(|(m, d)| m * d).sum();
        Ok(Self {
            n,
            mu,
            tau,
            dmu,
            v,
            diag,
            off,
            factor,
            w,
            logdet_d,
            mu_d_mu,
            accepts_since_refresh: 0,
            pending: None,
            vz: vec![0.0; n],
            scratch_diag: vec![0.0; n],
            scratch_pivot: vec![0.0; n],
            scratch_mult: vec![0.0; n.saturating_sub(1)],
            scratch_rhs: vec![0.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn volatilities(&self) -> &[f64] {
        &self.v
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// `w = V D mu`, the conditional mean of the latent path.
    pub fn conditional_mean(&self) -> &[f64] {
        &self.w
    }

    /// Current marginalized likelihood term
    /// `log N(0; mu, D^{-1}) - log N(0; V D mu, V)`.
    pub fn log_marginal_term(&self) -> f64 {
        let quad: f64 = self.dmu.iter().zip(&self.w).map(|(a, b)| a * b).sum();
        0.5 * (self.logdet_d - self.mu_d_mu - self.factor.logdet() + quad)
    }

    /// Log of the Gaussian-ratio factors of the volatility Metropolis ratio
    /// for replacing `v[i]` by `v_new`:
    /// `-1/2 log(1 + delta z^T V z) - (z^T V D mu)^2 / (2 (1/delta + z^T V z))`
    /// with `delta = 1/v_new - 1/v_old`, using one tridiagonal solve.
    ///
    /// Returns `None` when the rank-one update would leave the SPD cone,
    /// which the caller must treat as an immediate rejection. The prior,
    /// proposal, and `v^{-1/2}` factors are the caller's business.
    pub fn propose_volatility(&mut self, index: usize, v_new: f64) -> Option<f64> {
        assert!(index + 1 < self.n, "increment index {index} out of range");
        assert!(v_new > 0.0 && v_new.is_finite());
        let v_old = self.v[index];
        let delta = 1.0 / v_new - 1.0 / v_old;
        if delta == 0.0 {
            self.pending = Some(Pending {
                index,
                v_new,
                delta,
                s: 0.0,
                r: 0.0,
            });
            return Some(0.0);
        }
        // V z_i by one solve; z_i has +1 at index, -1 at index+1
        self.vz.fill(0.0);
        self.vz[index] = 1.0;
        self.vz[index + 1] = -1.0;
        self.factor.solve_in_place(&mut self.vz);
        let s = self.vz[index] - self.vz[index + 1];
        let t = 1.0 + delta * s;
        // NaN must reject too, so the negated comparison is load-bearing
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(t > 0.0) {
            self.pending = None;
            return None;
        }
        let r = self.w[index] - self.w[index + 1];
        let log_ratio = -0.5 * t.ln() - r * r / (2.0 * (1.0 / delta + s));
        self.pending = Some(Pending {
            index,
            v_new,
            delta,
            s,
            r,
        });
        Some(log_ratio)
    }

    /// Commit the last proposal evaluated by [`propose_volatility`].
    pub fn accept_pending(&mut self) {
        let p = self.pending.take().expect("no pending proposal to accept");
        let (i, delta) = (p.index, p.delta);
        self.v[i] = p.v_new;
        if delta == 0.0 {
            return;
        }
        self.diag[i] += delta;
        self.diag[i + 1] += delta;
        self.off[i] -= delta;
        self.factor
            .refill(&self.diag, &self.off, i)
            .expect("accepted update must stay SPD");
        // rank-one correction: w <- w - (z^T w / (1/delta + s)) V z
        let coef = p.r / (1.0 / delta + p.s);
        for k in 0..self.n {
            self.w[k] -= coef * self.vz[k];
        }
        self.accepts_since_refresh += 1;
        if self.accepts_since_refresh >= self.n {
            self.refresh_solves();
        }
    }

    /// Drop the last proposal.
    pub fn reject_pending(&mut self) {
        self.pending = None;
    }

    /// Recompute `w` from scratch against the current factor.
    pub fn refresh_solves(&mut self) {
        self.w.copy_from_slice(&self.dmu);
        self.factor.solve_in_place(&mut self.w);
        self.accepts_since_refresh = 0;
    }

    /// Replace layer `index`'s mixture component (mean, precision) and
    /// rebuild the affected caches.
    pub fn set_layer(&mut self, index: usize, mu_i: f64, tau_i: f64) -> Result<()> {
        if !(tau_i > 0.0 && tau_i.is_finite() && mu_i.is_finite()) {
            return Err(Error::invalid(format!(
                "layer {index}: non-positive precision or non-finite mean"
            )));
        }
        let old_tau = self.tau[index];
        let old_mu = self.mu[index];
        self.diag[index] += tau_i - old_tau;
        self.tau[index] = tau_i;
        self.mu[index] = mu_i;
        self.dmu[index] = mu_i * tau_i;
        self.logdet_d += tau_i.ln() - old_tau.ln();
        self.mu_d_mu += mu_i * mu_i * tau_i - old_mu * old_mu * old_tau;
        self.factor.refill(&self.diag, &self.off, index)?;
        self.refresh_solves();
        self.pending = None;
        Ok(())
    }

    /// Marginal term that would result from swapping layer `index` to
    /// component (mu_i, tau_i), computed from scratch in scratch buffers;
    /// the cached state is untouched.
    pub fn log_marginal_term_with_layer(&mut self, index: usize, mu_i: f64, tau_i: f64) -> Result<f64> {
        if !(tau_i > 0.0 && tau_i.is_finite() && mu_i.is_finite()) {
            return Err(Error::invalid(format!(
                "layer {index}: non-positive precision or non-finite mean"
            )));
        }
        self.scratch_diag.copy_from_slice(&self.diag);
        self.scratch_diag[index] += tau_i - self.tau[index];
        LdlFactor::fill_into(
            &self.scratch_diag,
            &self.off,
            &mut self.scratch_pivot,
            &mut self.scratch_mult,
        )?;
        self.scratch_rhs.copy_from_slice(&self.dmu);
        self.scratch_rhs[index] = mu_i * tau_i;
        let logdet_p: f64 = self.scratch_pivot.iter().map(|p| p.ln()).sum();
        // in-place solve against the scratch factor
        let n = self.n;
        for i in 1..n {
            self.scratch_rhs[i] -= self.scratch_mult[i - 1] * self.scratch_rhs[i - 1];
        }
        for i in 0..n {
            self.scratch_rhs[i] /= self.scratch_pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            self.scratch_rhs[i] -= self.scratch_mult[i] * self.scratch_rhs[i + 1];
        }
        let mut quad = 0.0;
        for k in 0..n {
            let dmu_k = if k == index { mu_i * tau_i } else { self.dmu[k] };
            quad += dmu_k * self.scratch_rhs[k];
        }
        let logdet_d = self.logdet_d - self.tau[index].ln() + tau_i.ln();
        let mu_d_mu = self.mu_d_mu - self.mu[index] * self.mu[index] * self.tau[index]
            + mu_i * mu_i * tau_i;
        Ok(0.5 * (logdet_d - mu_d_mu - logdet_p + quad))
    }

    /// Draw the latent path `N(V D mu, V)` into `out` (mean by the cached
    /// solve, noise by back-substitution against the factor).
    pub fn sample_path<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.factor.sample_zero_mean(rng, out);
        for (o, m) in out.iter_mut().zip(&self.w) {
            *o += m;
        }
    }
}

impl LdlFactor {
    pub(crate) fn refill(&mut self, diag: &[f64], off: &[f64], start: usize) -> Result<()> {
        let (pivot, mult) = self.parts_mut();
        Self::fill(diag, off, pivot, mult, start)
    }

    pub(crate) fn fill_into(
        diag: &[f64],
        off: &[f64],
        pivot: &mut [f64],
        mult: &mut [f64],
    ) -> Result<()> {
        Self::fill(diag, off, pivot, mult, 0)
    }
}
