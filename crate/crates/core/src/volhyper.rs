//! Conjugate complete conditionals for the volatility hyper-parameters
//! (eta, phi) of the squared-volatility prior `v_i ~ Ig2(eta d_i, phi d_i)`.
//!
//! These depend on the data only through the volatilities and time steps,
//! so the observed-series sampler and the marginalized engine share this
//! code path verbatim.

use crate::dists::{GammaDist, Gig};
use crate::error::{Error, Result};

/// Gamma prior hyper-parameters for eta and phi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolHyper {
    pub a_eta: f64,
    pub b_eta: f64,
    pub a_phi: f64,
    pub b_phi: f64,
}

impl Default for VolHyper {
    fn default() -> Self {
        // vague priors
        Self {
            a_eta: 0.01,
            b_eta: 0.01,
            a_phi: 0.01,
            b_phi: 0.01,
        }
    }
}

impl VolHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("a_eta", self.a_eta),
            ("b_eta", self.b_eta),
            ("a_phi", self.a_phi),
            ("b_phi", self.b_phi),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {x}")));
            }
        }
        Ok(())
    }
}

fn summaries(v: &[f64], deltas: &[f64]) -> Result<(f64, f64, f64)> {
    if v.len() != deltas.len() || v.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} volatilities vs {} time steps",
            v.len(),
            deltas.len()
        )));
    }
    let mut u1 = 0.0;
    let mut u3 = 0.0;
    let mut sum_d = 0.0;
    for (&vi, &di) in v.iter().zip(deltas) {
        if !(vi > 0.0 && di > 0.0) {
            return Err(Error::invalid("volatilities and time steps must be positive".to_string()));
        }
        u1 += vi;
        u3 += di * di / vi;
        sum_d += di;
    }
    Ok((u1, u3, sum_d))
}

/// eta | v, phi ~ GIG((n-1)/2 + a_eta, phi u1, phi u3 + 2 b_eta)
/// with u1 = sum v_i and u3 = sum d_i^2 / v_i.
pub fn eta_conditional(v: &[f64], deltas: &[f64], phi: f64, hyper: &VolHyper) -> Result<Gig> {
    let (u1, u3, _) = summaries(v, deltas)?;
    let k = v.len() as f64;
    Gig::new(k / 2.0 + hyper.a_eta, phi * u1, phi * u3 + 2.0 * hyper.b_eta)
}

/// phi | v, eta ~ Gamma((n-1)/2 + a_phi, u1/(2 eta) - u2 + u3 eta / 2)
/// with u2 = sum d_i - b_phi. The rate is at least b_phi by the AM-GM and
/// Cauchy-Schwarz inequalities; a nonpositive value indicates corrupted
/// inputs and is reported with the summaries attached.
pub fn phi_conditional(v: &[f64], deltas: &[f64], eta: f64, hyper: &VolHyper) -> Result<GammaDist> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    let (u1, u3, sum_d) = summaries(v, deltas)?;
    let u2 = sum_d - hyper.b_phi;
    let rate = u1 / (2.0 * eta) - u2 + u3 * eta / 2.0;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Numerical(format!(
            "phi conditional rate {rate} <= 0 (u1={u1}, u2={u2}, u3={u3}, eta={eta}, b_phi={})",
            hyper.b_phi
        )));
    }
    let k = v.len() as f64;
    GammaDist::new(k / 2.0 + hyper.a_phi, rate)
}
