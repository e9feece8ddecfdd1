//! Generalised Inverse Gaussian distribution.
//!
//! Density proportional to `x^{lambda-1} exp(-(chi/x + psi x)/2)` on x > 0,
//! normalized by the modified-Bessel constant. Sampling uses the
//! ratio-of-uniforms method with mode shift (the extrema of the hat region
//! solve a cubic), with shortcuts for the Inverse Gaussian (`lambda = -1/2`),
//! Gamma (`chi = 0`) and inverse-Gamma (`psi = 0`) boundary cases.

use crate::error::{Error, Result};
use crate::special::{ln_gamma, log_bessel_k};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use std::f64::consts::LN_2;

use super::Ig2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gig {
    lambda: f64,
    chi: f64,
    psi: f64,
}

impl Gig {
    pub fn new(lambda: f64, chi: f64, psi: f64) -> Result<Self> {
        let finite = lambda.is_finite() && chi.is_finite() && psi.is_finite();
        let nonneg = chi >= 0.0 && psi >= 0.0;
        let proper = (chi > 0.0 || psi > 0.0)
            && (lambda < 0.0 || psi > 0.0)
            && (lambda > 0.0 || chi > 0.0);
        if !(finite && nonneg && proper) {
            return Err(Error::invalid(format!(
                "invalid GIG parameters lambda={lambda} chi={chi} psi={psi}"
            )));
        }
        Ok(Self { lambda, chi, psi })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// Log normalizing constant: log ∫ x^{lambda-1} exp(-(chi/x+psi x)/2) dx.
    fn log_norm(&self) -> f64 {
        let (l, chi, psi) = (self.lambda, self.chi, self.psi);
        if chi == 0.0 {
            // Gamma(l, rate psi/2)
            ln_gamma(l) - l * (psi / 2.0).ln()
        } else if psi == 0.0 {
            // inverse Gamma(-l, rate chi/2)
            ln_gamma(-l) + l * (chi / 2.0).ln()
        } else {
            let omega = (chi * psi).sqrt();
            LN_2 + log_bessel_k(l, omega) - 0.5 * l * (psi.ln() - chi.ln())
        }
    }

    /// Log-density; −∞ outside the support.
    pub fn logpdf(&self, x: f64) -> f64 {
        if x <= 0.0 || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        (self.lambda - 1.0) * x.ln() - 0.5 * (self.chi / x + self.psi * x) - self.log_norm()
    }

    pub fn logpdf_checked(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::invalid(format!("GIG support is x > 0, got {x}")));
        }
        Ok(self.logpdf(x))
    }

    /// E[X] = sqrt(chi/psi) K_{lambda+1}(omega) / K_lambda(omega).
    pub fn mean(&self) -> f64 {
        let (l, chi, psi) = (self.lambda, self.chi, self.psi);
        if chi == 0.0 {
            return l / (psi / 2.0);
        }
        if psi == 0.0 {
            // inverse gamma mean, finite only for -l > 1
            return if -l > 1.0 {
                (chi / 2.0) / (-l - 1.0)
            } else {
                f64::INFINITY
            };
        }
        let omega = (chi * psi).sqrt();
        (0.5 * (chi.ln() - psi.ln()) + log_bessel_k(l + 1.0, omega) - log_bessel_k(l, omega)).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (l, chi, psi) = (self.lambda, self.chi, self.psi);
        if chi == 0.0 {
            return Gamma::new(l, 2.0 / psi).unwrap().sample(rng);
        }
        if psi == 0.0 {
            return 1.0 / Gamma::new(-l, 2.0 / chi).unwrap().sample(rng);
        }
        if (l + 0.5).abs() < 1e-14 {
            // GIG(-1/2, chi, psi) is Inverse Gaussian with mean sqrt(chi/psi),
            // shape chi; Ig2(eta, phi) has shape phi*eta, so phi = chi/eta.
            let eta = (chi / psi).sqrt();
            return Ig2::new(eta, chi / eta).unwrap().sample(rng);
        }
        if (l - 0.5).abs() < 1e-14 {
            // reciprocal property: 1/X ~ GIG(-lambda, psi, chi)
            return 1.0 / Gig::new(-l, psi, chi).unwrap().sample(rng);
        }
        // two-parameter reduction: X = sqrt(chi/psi) Y with Y ~ GIG(l, omega, omega)
        let omega = (chi * psi).sqrt();
        (chi / psi).sqrt() * sample_rou_mode_shift(l, omega, rng)
    }
}

/// Ratio-of-uniforms with mode shift for the two-parameter kernel
/// g(y) = y^{lambda-1} exp(-omega (y + 1/y) / 2).
fn sample_rou_mode_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let lm1 = lambda - 1.0;
    let mode = (lm1 + (lm1 * lm1 + omega * omega).sqrt()) / omega;
    let log_g = |y: f64| lm1 * y.ln() - 0.5 * omega * (y + 1.0 / y);
    let log_g_mode = log_g(mode);

    // extrema of (y - mode)^2 g(y): roots of
    // y^3 + p2 y^2 + p1 y + p0 with the positive pair bracketing the mode
    let p2 = -(2.0 * lambda + 2.0 + omega * mode) / omega;
    let p1 = (2.0 * lm1 * mode - omega) / omega;
    let p0 = mode;
    let roots = solve_cubic(p2, p1, p0);
    let mut y_lo = f64::NAN;
    let mut y_hi = f64::NAN;
    for r in roots.into_iter().flatten() {
        if r > 0.0 && r < mode {
            y_lo = r;
        } else if r > mode {
            y_hi = r;
        }
    }
    debug_assert!(y_lo.is_finite() && y_hi.is_finite(), "RoU bracket failed");

    let v_lo = (y_lo - mode) * (0.5 * (log_g(y_lo) - log_g_mode)).exp();
    let v_hi = (y_hi - mode) * (0.5 * (log_g(y_hi) - log_g_mode)).exp();

    loop {
        let u: f64 = rng.random::<f64>();
        if u == 0.0 {
            continue;
        }
        let v = v_lo + rng.random::<f64>() * (v_hi - v_lo);
        let y = v / u + mode;
        if y > 0.0 && 2.0 * u.ln() <= log_g(y) - log_g_mode {
            return y;
        }
    }
}

/// Real roots of x^3 + a x^2 + b x + c (trigonometric method).
fn solve_cubic(a: f64, b: f64, c: f64) -> [Option<f64>; 3] {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = 4.0 * p * p * p + 27.0 * q * q;
    if disc < 0.0 {
        // three distinct real roots
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut out = [None; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let t = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            *slot = Some(t + shift);
        }
        out
    } else {
        // one real root (Cardano)
        let s = (-q / 2.0 + (disc / 108.0).sqrt()).cbrt();
        let t = (-q / 2.0 - (disc / 108.0).sqrt()).cbrt();
        [Some(s + t + shift), None, None]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diag;
    use crate::rng::seeded;

    #[test]
    fn gamma_special_case_matches_pointwise() {
        // GIG(a, 0, psi) == Gamma(shape a, rate psi/2)
        let (a, psi) = (2.3, 3.0);
        let g = Gig::new(a, 0.0, psi).unwrap();
        for &x in &[0.1f64, 0.5, 1.0, 2.0, 7.5] {
            let expect = a * (psi / 2.0).ln() - ln_gamma(a) + (a - 1.0) * x.ln() - psi / 2.0 * x;
            assert!((g.logpdf(x) - expect).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn inverse_gaussian_special_case_matches_pointwise() {
        // GIG(-1/2, chi, psi) == Ig2(sqrt(chi/psi), chi/sqrt(chi/psi))
        let (chi, psi) = (2.0, 5.0);
        let g = Gig::new(-0.5, chi, psi).unwrap();
        let eta = (chi / psi).sqrt();
        let ig = Ig2::new(eta, chi / eta).unwrap();
        // Ig2 density carries exp(shape/eta * ...) cross term: account exactly.
        // Ig2(eta, phi) kernel: -(phi eta)/(2v) - (phi/(2 eta)) v + phi const
        for &x in &[0.2, 0.63, 1.0, 3.7] {
            assert!(
                (g.logpdf(x) - ig.logpdf(x)).abs() < 1e-10,
                "x={x}: {} vs {}",
                g.logpdf(x),
                ig.logpdf(x)
            );
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        let cases = [
            Gig::new(-1.0, 2.0, 3.0).unwrap(),
            Gig::new(2.0, 1.0, 1.0).unwrap(),
            Gig::new(0.5, 4.0, 0.5).unwrap(),
            Gig::new(60.0, 10.0, 5.0).unwrap(),
            Gig::new(3.0, 0.0, 2.0).unwrap(),
            Gig::new(-2.0, 3.0, 0.0).unwrap(),
        ];
        for g in cases {
            let total = diag::density_mass_positive(&|x| g.logpdf(x), 1e-9);
            assert!(
                (total - 1.0).abs() < 1e-6,
                "lambda={} chi={} psi={}: {total}",
                g.lambda(),
                g.chi(),
                g.psi()
            );
        }
    }

    #[test]
    fn sample_mean_matches_bessel_ratio() {
        let cases = [
            Gig::new(-1.0, 2.0, 3.0).unwrap(),
            Gig::new(1.8, 1.5, 2.5).unwrap(),
            Gig::new(-0.5, 1.0, 1.0).unwrap(),
            Gig::new(10.0, 6.0, 1.0).unwrap(),
        ];
        let mut rng = seeded(314);
        for g in cases {
            let n = 1_000_000usize;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let x = g.sample(&mut rng);
                sum += x;
                sumsq += x * x;
            }
            let mean = sum / n as f64;
            let sd = (sumsq / n as f64 - mean * mean).sqrt();
            let se = sd / (n as f64).sqrt();
            let expect = g.mean();
            assert!(
                (mean - expect).abs() < 5.0 * se + 1e-9,
                "lambda={}: mean {mean} expect {expect} se {se}",
                g.lambda()
            );
        }
    }

    #[test]
    fn invalid_combinations_rejected() {
        assert!(Gig::new(1.0, 0.0, 0.0).is_err());
        assert!(Gig::new(1.0, 2.0, 0.0).is_err()); // lambda > 0 needs psi > 0
        assert!(Gig::new(-1.0, 0.0, 2.0).is_err()); // lambda < 0 needs chi > 0
        assert!(Gig::new(0.0, 1.0, 0.0).is_err());
        assert!(Gig::new(1.0, -0.1, 1.0).is_err());
        assert!(Gig::new(1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn deterministic_given_seed() {
        let g = Gig::new(-1.0, 1.3, 0.8).unwrap();
        let a: Vec<f64> = {
            let mut r = seeded(5);
            (0..40).map(|_| g.sample(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = seeded(5);
            (0..40).map(|_| g.sample(&mut r)).collect()
        };
        assert_eq!(a, b);
    }
}
