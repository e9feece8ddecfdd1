//! Samplers and log-densities for the distribution families the model
//! relies on: Inverse Gaussian in its mean/concentration form, Generalised
//! Inverse Gaussian, Normal-Inverse-Gaussian, Gamma, small multivariate
//! normals, and the zero-inflated Poisson.
//!
//! Everything is a pure function of (rng state, parameters); parameters are
//! validated at construction and the `logpdf` accessors return −∞ outside
//! the support so Metropolis ratio code can call them unguarded.

mod gamma;
mod gig;
mod ig2;
mod nig;
mod normal;
mod zip;

pub use gamma::GammaDist;
pub use gig::Gig;
pub use ig2::Ig2;
pub use nig::Nig;
pub use normal::{BivariateNormal, normal_logpdf};
pub use zip::Zip;
