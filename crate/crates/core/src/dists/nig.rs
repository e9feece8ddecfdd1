//! Normal-Inverse-Gaussian distribution as a mean-scale mixture:
//! `x | v ~ N(mu + beta v, v)` with `v ~ Ig2(eta, phi)`.
//!
//! Only the (mu, beta, eta, phi) form is exposed; in classical NIG notation
//! this corresponds to delta = sqrt(phi*eta), gamma = sqrt(phi/eta) and
//! alpha^2 = gamma^2 + beta^2. Closed under addition: the law over horizon
//! `delta_t` is obtained by scaling (mu, eta, phi) by `delta_t`.

use crate::error::{Error, Result};
use crate::special::log_bessel_k;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use super::Ig2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nig {
    mu: f64,
    beta: f64,
    eta: f64,
    phi: f64,
}

impl Nig {
    pub fn new(mu: f64, beta: f64, eta: f64, phi: f64) -> Result<Self> {
        if !(mu.is_finite() && beta.is_finite()) {
            return Err(Error::invalid("Nig mu and beta must be finite".to_string()));
        }
        if !(eta > 0.0 && eta.is_finite() && phi > 0.0 && phi.is_finite()) {
            return Err(Error::invalid(format!(
                "Nig eta and phi must be positive, got eta={eta} phi={phi}"
            )));
        }
        Ok(Self { mu, beta, eta, phi })
    }

    /// The law of an increment over time horizon `delta_t`.
    pub fn at_horizon(&self, delta_t: f64) -> Result<Self> {
        Nig::new(self.mu * delta_t, self.beta, self.eta * delta_t, self.phi * delta_t)
    }

    pub fn mixing(&self) -> Ig2 {
        Ig2::new(self.eta, self.phi).expect("validated at construction")
    }

    /// Log-density (Bessel closed form of the Gaussian–IG mixture).
    pub fn logpdf(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let delta = (self.phi * self.eta).sqrt();
        let gamma = (self.phi / self.eta).sqrt();
        let alpha = (gamma * gamma + self.beta * self.beta).sqrt();
        let d = x - self.mu;
        let z = (delta * delta + d * d).sqrt();
        (alpha * delta / PI).ln() + delta * gamma + self.beta * d + log_bessel_k(1.0, alpha * z)
            - z.ln()
    }

    /// Draw by compounding the mixture representation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = self.mixing().sample(rng);
        let z: f64 = rng.sample(StandardNormal);
        self.mu + self.beta * v + v.sqrt() * z
    }
}
