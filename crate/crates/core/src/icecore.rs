//! Gibbs sampler for a directly observed, precisely dated series under the
//! NIG increment model
//! `x_i = o_i - o_{i-1} ~ N(mu d_i + beta v_i, v_i)`,
//! `v_i ~ Ig2(eta d_i, phi d_i)`.
//!
//! The update order per sweep is (eta, phi, v, (mu, beta)). The likelihood
//! is written on increments; the v_i conditional weight on the linear term
//! is `beta^2 + phi/eta` as derived from the model (the alternative
//! `(beta d_i)^2 + phi/eta` form is available behind [`VolPsiForm`] for
//! comparison; the quadrature tests pin the default).

use crate::dists::{BivariateNormal, Gig};
use crate::error::{Error, Result};
use crate::volhyper::{eta_conditional, phi_conditional, VolHyper};
use rand::Rng;

/// Observed series: strictly increasing times (ka BP) and values.
#[derive(Debug, Clone)]
pub struct SeriesData {
    t: Vec<f64>,
    o: Vec<f64>,
}

impl SeriesData {
    /// Sorts the pairs by time and validates strict monotonicity.
    pub fn new(t: Vec<f64>, o: Vec<f64>) -> Result<Self> {
        if t.len() != o.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times vs {} observations",
                t.len(),
                o.len()
            )));
        }
        if t.len() < 3 {
            return Err(Error::invalid("series needs at least 3 points".to_string()));
        }
        if t.iter().chain(o.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("series contains non-finite values".to_string()));
        }
        let mut pairs: Vec<(f64, f64)> = t.into_iter().zip(o).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if pairs.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("series times must be strictly increasing".to_string()));
        }
        let (t, o) = pairs.into_iter().unzip();
        Ok(Self { t, o })
    }

    /// Load a `time_ka,value` CSV; optionally standardize values to mean 0,
    /// standard deviation 1.
    pub fn from_csv(path: &std::path::Path, standardize: bool) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(std::io::BufReader::new(file));
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if headers.len() < 2 || &headers[0] != "time_ka" || &headers[1] != "value" {
            return Err(Error::Parse(format!(
                "{}: expected header time_ka,value",
                path.display()
            )));
        }
        let mut t = Vec::new();
        let mut o = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let line = record
                .position()
                .map(|p| p.line().to_string())
                .unwrap_or_else(|| "?".into());
            let ti: f64 = record[0]
                .parse()
                .map_err(|_| Error::Parse(format!("{} line {line}: bad time", path.display())))?;
            let oi: f64 = record[1]
                .parse()
                .map_err(|_| Error::Parse(format!("{} line {line}: bad value", path.display())))?;
            t.push(ti);
            o.push(oi);
        }
        let mut series = Self::new(t, o)?;
        if standardize {
            let (mean, sd) = crate::diag::mean_sd(&series.o);
            if sd > 0.0 {
                for x in &mut series.o {
                    *x = (*x - mean) / sd;
                }
            }
        }
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.o
    }

    /// Time steps and increments (both length n-1).
    pub fn increments(&self) -> (Vec<f64>, Vec<f64>) {
        let deltas = self.t.windows(2).map(|w| w[1] - w[0]).collect();
        let x = self.o.windows(2).map(|w| w[1] - w[0]).collect();
        (deltas, x)
    }
}

/// Prior hyper-parameters: Gamma on eta and phi, zero-mean normals with
/// precisions tau_mu, tau_beta on drift and skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IceHyper {
    pub vol: VolHyper,
    pub tau_mu: f64,
    pub tau_beta: f64,
}

impl Default for IceHyper {
    fn default() -> Self {
        Self {
            vol: VolHyper::default(),
            tau_mu: 0.01,
            tau_beta: 0.01,
        }
    }
}

impl IceHyper {
    pub fn validate(&self) -> Result<()> {
        self.vol.validate()?;
        if !(self.tau_mu > 0.0 && self.tau_beta > 0.0) {
            return Err(Error::invalid("tau_mu and tau_beta must be positive".to_string()));
        }
        Ok(())
    }
}

/// Which linear-term weight the v_i conditional uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolPsiForm {
    /// beta^2 + phi/eta, derived from the increment model.
    #[default]
    Derived,
    /// (beta d_i)^2 + phi/eta, as printed in some write-ups.
    AsPrinted,
}

/// One MCMC state.
#[derive(Debug, Clone, PartialEq)]
pub struct IceState {
    pub mu: f64,
    pub beta: f64,
    pub eta: f64,
    pub phi: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct IceConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub psi_form: VolPsiForm,
}

impl Default for IceConfig {
    fn default() -> Self {
        Self {
            iters: 100_000,
            burnin: 20_000,
            thin: 80,
            psi_form: VolPsiForm::Derived,
        }
    }
}

impl IceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(Error::invalid(format!(
                "iters {} must exceed burnin {}",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// v_i | rest ~ GIG(-1, (x_i - mu d_i)^2 + phi eta d_i^2, psi) with psi per
/// [`VolPsiForm`].
pub fn v_conditional(
    x_i: f64,
    delta_i: f64,
    mu: f64,
    beta: f64,
    eta: f64,
    phi: f64,
    form: VolPsiForm,
) -> Result<Gig> {
    let resid = x_i - mu * delta_i;
    let chi = resid * resid + phi * eta * delta_i * delta_i;
    let beta_term = match form {
        VolPsiForm::Derived => beta * beta,
        VolPsiForm::AsPrinted => beta * delta_i * (beta * delta_i),
    };
    Gig::new(-1.0, chi, beta_term + phi / eta)
}

/// (mu, beta) | rest: bivariate normal with precision
/// `[[sum d^2/v + tau_mu, sum d], [sum d, sum v + tau_beta]]` and linear
/// term `[sum d x / v, sum x]`.
pub fn mu_beta_conditional(
    deltas: &[f64],
    x: &[f64],
    v: &[f64],
    hyper: &IceHyper,
) -> Result<BivariateNormal> {
    let mut p00 = hyper.tau_mu;
    let mut p01 = 0.0;
    let mut p11 = hyper.tau_beta;
    let mut b0 = 0.0;
    let mut b1 = 0.0;
    for ((&d, &xi), &vi) in deltas.iter().zip(x).zip(v) {
        p00 += d * d / vi;
        p01 += d;
        p11 += vi;
        b0 += d * xi / vi;
        b1 += xi;
    }
    BivariateNormal::from_precision([[p00, p01], [p01, p11]], [b0, b1])
}

/// One Gibbs sweep, updating (eta, phi, v, (mu, beta)) in order.
pub fn gibbs_step<R: Rng + ?Sized>(
    state: &mut IceState,
    deltas: &[f64],
    x: &[f64],
    hyper: &IceHyper,
    psi_form: VolPsiForm,
    rng: &mut R,
) -> Result<()> {
    state.eta = eta_conditional(&state.v, deltas, state.phi, &hyper.vol)?.sample(rng);
    state.phi = phi_conditional(&state.v, deltas, state.eta, &hyper.vol)?.sample(rng);
    for i in 0..state.v.len() {
        state.v[i] = v_conditional(
            x[i],
            deltas[i],
            state.mu,
            state.beta,
            state.eta,
            state.phi,
            psi_form,
        )?
        .sample(rng);
    }
    let [mu, beta] = mu_beta_conditional(deltas, x, &state.v, hyper)?.sample(rng);
    state.mu = mu;
    state.beta = beta;
    Ok(())
}

/// Starting state: prior-mean volatilities at unit hyper-parameters.
pub fn init_state(deltas: &[f64]) -> IceState {
    IceState {
        mu: 0.0,
        beta: 0.0,
        eta: 1.0,
        phi: 1.0,
        v: deltas.to_vec(),
    }
}

/// Run the sampler, retaining every `thin`-th state after burn-in.
pub fn run<R: Rng + ?Sized>(
    data: &SeriesData,
    hyper: &IceHyper,
    config: &IceConfig,
    rng: &mut R,
) -> Result<Vec<IceState>> {
    hyper.validate()?;
    config.validate()?;
    let (deltas, x) = data.increments();
    let mut state = init_state(&deltas);
    let retained = (config.iters - config.burnin) / config.thin;
    let mut out = Vec::with_capacity(retained);
    for it in 0..config.iters {
        gibbs_step(&mut state, &deltas, &x, hyper, config.psi_form, rng)?;
        let done = it + 1;
        if done > config.burnin && (done - config.burnin).is_multiple_of(config.thin) {
            out.push(state.clone());
        }
    }
    Ok(out)
}
