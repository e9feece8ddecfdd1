//! Zero-inflated Poisson.

use crate::error::{Error, Result};
use crate::special::{ln_gamma, log_add_exp};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zip {
    p_zero: f64,
    rate: f64,
}

impl Zip {
    pub fn new(p_zero: f64, rate: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&p_zero) && rate >= 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!(
                "Zip needs 0 <= p_zero <= 1 and rate >= 0, got p={p_zero} rate={rate}"
            )));
        }
        Ok(Self { p_zero, rate })
    }

    /// P(0) = p + (1-p) e^{-rate}; P(k>0) = (1-p) Poisson(k; rate).
    pub fn logpmf(&self, k: u64) -> f64 {
        let (p, r) = (self.p_zero, self.rate);
        if k == 0 {
            if p == 1.0 {
                return 0.0;
            }
            return log_add_exp(p.ln(), (1.0 - p).ln() - r);
        }
        if p == 1.0 || r == 0.0 {
            return f64::NEG_INFINITY;
        }
        (1.0 - p).ln() + k as f64 * r.ln() - r - ln_gamma(k as f64 + 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if rng.random::<f64>() < self.p_zero {
            return 0;
        }
        if self.rate == 0.0 {
            return 0;
        }
        Poisson::new(self.rate).unwrap().sample(rng) as u64
    }
}
