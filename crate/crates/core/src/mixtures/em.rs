//! Diagonal-covariance Gaussian mixture fitting by EM with restarts.
//!
//! Restart 0 initializes every component at the pooled Gaussian, which makes
//! the winning log-likelihood at least the single-Gaussian maximum (EM is
//! monotone from that start); the remaining restarts use distance-weighted
//! farthest-point seeding. Components that collapse (vanishing weight or
//! variance under the floor) trigger a refit with one component fewer.

use super::MixtureComponent;
use crate::error::{Error, Result};
use crate::special::{log_sum_exp, LN_2PI};
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct EmConfig {
    /// Number of random restarts (restart 0 is the pooled start).
    pub restarts: usize,
    /// Relative log-likelihood change below which a run has converged.
    pub tol: f64,
    pub max_iters: usize,
    /// Variance floor as a fraction of the per-dimension sample variance.
    pub variance_floor: f64,
    /// Components below this weight are pruned and the layer refitted.
    pub min_weight: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            tol: 1e-8,
            max_iters: 500,
            variance_floor: 1e-6,
            min_weight: 1e-6,
        }
    }
}

/// Outcome of a mixture fit.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub components: Vec<MixtureComponent>,
    pub log_likelihood: f64,
    /// Log-likelihood trace of the winning run, monotone nondecreasing.
    pub history: Vec<f64>,
    /// Number of components actually fitted after any pruning.
    pub fitted_components: usize,
}

/// Fit a diagonal Gaussian mixture with `g` components.
pub fn fit_mixture_em<R: Rng + ?Sized>(
    samples: &[Vec<f64>],
    g: usize,
    config: &EmConfig,
    rng: &mut R,
) -> Result<EmFit> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot fit a mixture to an empty sample"));
    }
    if g == 0 {
        return Err(Error::invalid("need at least one mixture component"));
    }
    if samples.len() < 10 * g {
        return Err(Error::invalid(format!(
            "{} samples are too few for {g} components (need 10 per component)",
            samples.len()
        )));
    }
    let m = samples[0].len();
    if m == 0 || samples.iter().any(|s| s.len() != m) {
        return Err(Error::DimensionMismatch(
            "inconsistent sample dimensions".into(),
        ));
    }

    let (pooled_mean, pooled_var) = pooled_moments(samples);
    let floor: Vec<f64> = pooled_var
        .iter()
        .map(|&v| (config.variance_floor * v).max(1e-30))
        .collect();

    let mut best: Option<(f64, Vec<Component>, Vec<f64>)> = None;
    let mut degenerate = false;
    for restart in 0..config.restarts.max(1) {
        let init = if restart == 0 {
            pooled_init(g, &pooled_mean, &pooled_var)
        } else {
            seeded_init(samples, g, &pooled_var, rng)
        };
        match run_em(samples, init, &floor, config) {
            RunOutcome::Converged(ll, comps, history) => {
                if best.as_ref().is_none_or(|(b, _, _)| ll > *b) {
                    best = Some((ll, comps, history));
                }
            }
            RunOutcome::Degenerate => degenerate = true,
        }
    }

    match best {
        Some((ll, comps, history)) => {
            let components = comps
                .into_iter()
                .map(|c| MixtureComponent {
                    weight: c.weight,
                    mean: c.mean,
                    precision_diag: c.var.iter().map(|&v| 1.0 / v).collect(),
                })
                .collect();
            Ok(EmFit {
                components,
                log_likelihood: ll,
                history,
                fitted_components: g,
            })
        }
        None if degenerate && g > 1 => {
            // every restart collapsed a component: refit with one fewer
            let mut fit = fit_mixture_em(samples, g - 1, config, rng)?;
            fit.fitted_components = fit.components.len();
            Ok(fit)
        }
        None => Err(Error::Numerical(format!(
            "EM failed to fit {g} components to {} samples",
            samples.len()
        ))),
    }
}

#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
}

enum RunOutcome {
    Converged(f64, Vec<Component>, Vec<f64>),
    Degenerate,
}

fn pooled_moments(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let m = samples[0].len();
    let mut mean = vec![0.0; m];
    for s in samples {
        for (acc, x) in mean.iter_mut().zip(s) {
            *acc += x;
        }
    }
    for acc in &mut mean {
        *acc /= n;
    }
    let mut var = vec![0.0; m];
    for s in samples {
        for j in 0..m {
            let d = s[j] - mean[j];
            var[j] += d * d;
        }
    }
    for acc in &mut var {
        *acc = (*acc / n).max(1e-300);
    }
    (mean, var)
}

fn pooled_init(g: usize, mean: &[f64], var: &[f64]) -> Vec<Component> {
    (0..g)
        .map(|_| Component {
            weight: 1.0 / g as f64,
            mean: mean.to_vec(),
            var: var.to_vec(),
        })
        .collect()
}

/// Distance-weighted farthest-point seeding: first center uniform, each
/// further center drawn with probability proportional to the squared
/// distance to its nearest chosen center.
fn seeded_init<R: Rng + ?Sized>(
    samples: &[Vec<f64>],
    g: usize,
    pooled_var: &[f64],
    rng: &mut R,
) -> Vec<Component> {
    let n = samples.len();
    let mut centers: Vec<usize> = Vec::with_capacity(g);
    centers.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = samples
        .iter()
        .map(|s| sq_dist(s, &samples[centers[0]]))
        .collect();
    while centers.len() < g {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(idx);
        for (i, s) in samples.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(s, &samples[idx]));
        }
    }
    centers
        .into_iter()
        .map(|c| Component {
            weight: 1.0 / g as f64,
            mean: samples[c].clone(),
            var: pooled_var.to_vec(),
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn run_em(
    samples: &[Vec<f64>],
    mut comps: Vec<Component>,
    floor: &[f64],
    config: &EmConfig,
) -> RunOutcome {
    let n = samples.len();
    let m = samples[0].len();
    let g = comps.len();
    let mut resp = vec![0.0f64; n * g];
    let mut terms = vec![0.0f64; g];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut history = Vec::new();

    for _iter in 0..config.max_iters {
        // E step
        let mut ll = 0.0;
        for (i, s) in samples.iter().enumerate() {
            for (k, c) in comps.iter().enumerate() {
                let mut acc = c.weight.ln() - 0.5 * m as f64 * LN_2PI;
                for j in 0..m {
                    let d = s[j] - c.mean[j];
                    acc -= 0.5 * (c.var[j].ln() + d * d / c.var[j]);
                }
                terms[k] = acc;
            }
            let norm = log_sum_exp(&terms);
            ll += norm;
            for k in 0..g {
                resp[i * g + k] = (terms[k] - norm).exp();
            }
        }
        history.push(ll);

        // M step
        for (k, c) in comps.iter_mut().enumerate() {
            let nk: f64 = (0..n).map(|i| resp[i * g + k]).sum();
            if !(nk.is_finite()) || nk / (n as f64) < config.min_weight {
                return RunOutcome::Degenerate;
            }
            c.weight = nk / n as f64;
            for j in 0..m {
                let mut mu = 0.0;
                for (i, s) in samples.iter().enumerate() {
                    mu += resp[i * g + k] * s[j];
                }
                mu /= nk;
                let mut var = 0.0;
                for (i, s) in samples.iter().enumerate() {
                    let d = s[j] - mu;
                    var += resp[i * g + k] * d * d;
                }
                var /= nk;
                if g > 1 && var < floor[j] / 100.0 {
                    return RunOutcome::Degenerate;
                }
                c.mean[j] = mu;
                c.var[j] = var.max(floor[j]);
            }
        }

        let rel = (ll - prev_ll).abs() / (1.0 + ll.abs());
        if prev_ll.is_finite() && rel < config.tol {
            return RunOutcome::Converged(ll, comps, history);
        }
        prev_ll = ll;
    }
    RunOutcome::Converged(prev_ll, comps, history)
}
