//! Bayesian inference for latent multivariate time series under a
//! Normal-Inverse-Gaussian process prior.
//!
//! Per-time-point likelihood information arrives as pre-computed marginal
//! data posterior samples, fitted as finite Gaussian mixtures; observation
//! times are uncertain and supplied as chronology draws. The engine
//! marginalizes the latent state, infers squared volatilities by MCMC with
//! rank-one Woodbury updates over tridiagonal precisions, reconstructs
//! latent paths, and interpolates paths and volatilities on a regular grid
//! via Inverse-Gaussian and Brownian bridges.

pub mod diag;
pub mod dists;
pub mod engine;
pub mod error;
pub mod icecore;
pub mod lincore;
pub mod mixtures;
pub mod posterior;
pub mod rng;
pub mod special;
pub mod validate;
pub mod volhyper;

pub use error::{Error, Result};
