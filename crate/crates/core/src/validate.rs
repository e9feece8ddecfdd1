//! End-to-end validation on simulated data: generate truth from the model,
//! build marginal data posteriors (exactly for the Gaussian scenario, by
//! importance sampling for the zero-inflated Poisson scenarios), run the
//! full pipeline, and report how often the true climates fall inside the
//! 90% and 50% posterior credible intervals.

use crate::dists::{Ig2, Zip};
use crate::engine::{ChronologySet, Engine, EngineConfig, ScanOrder};
use crate::error::{Error, Result};
use crate::mixtures::{fit_mixture_em, EmConfig, LayerMdp, MixtureComponent, MixtureSet};
use crate::posterior::draw_climate;
use crate::rng::{child_seed, substream, Generator};
use crate::volhyper::VolHyper;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::io::Write;

/// Validation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Gaussian likelihood with known per-layer precision.
    S1,
    /// Zero-inflated Poisson likelihood, G=5 mixture components.
    S2,
    /// As S2 with deliberately too few components (G=2).
    S3,
    /// As S2 with under-estimated IG parameters (bias U(0.5,1)).
    S4a,
    /// As S2 with over-estimated IG parameters (bias U(1,5)).
    S4b,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Self::S1),
            "2" => Ok(Self::S2),
            "3" => Ok(Self::S3),
            "4a" => Ok(Self::S4a),
            "4b" => Ok(Self::S4b),
            other => Err(Error::invalid(format!(
                "unknown scenario {other:?} (expected 1, 2, 3, 4a or 4b)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::S1 => "1",
            Self::S2 => "2",
            Self::S3 => "3",
            Self::S4a => "4a",
            Self::S4b => "4b",
        }
    }

    pub fn detail(&self) -> &'static str {
        match self {
            Self::S1 => "Gaussian likelihood",
            Self::S2 => "ZIP likelihood",
            Self::S3 => "ZIP likelihood (too few mixture components)",
            Self::S4a => "ZIP likelihood (under-estimated IG parameters)",
            Self::S4b => "ZIP likelihood (over-estimated IG parameters)",
        }
    }

    pub fn mixture_components(&self) -> usize {
        match self {
            Self::S3 => 2,
            _ => 5,
        }
    }
}

/// How the simulated per-layer noise parameter delta is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseReading {
    /// delta is a precision: y ~ N(c, sd = sqrt(1/delta)).
    #[default]
    Precision,
    /// alternative reading: the variance itself is sqrt(1/delta).
    VarianceSqrtInv,
}

#[derive(Debug, Clone)]
pub struct ValidateConfig {
    pub n: usize,
    pub m: usize,
    pub importance_samples: usize,
    pub em: EmConfig,
    pub engine_iters: usize,
    pub engine_burnin: usize,
    pub engine_thin: usize,
    pub proposal_sd: f64,
    pub noise_reading: NoiseReading,
    /// layers with importance ESS below this are flagged
    pub min_ess: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            n: 100,
            m: 3,
            importance_samples: 3000,
            em: EmConfig {
                restarts: 4,
                ..EmConfig::default()
            },
            engine_iters: 4000,
            engine_burnin: 1000,
            engine_thin: 15,
            proposal_sd: 1.0,
            noise_reading: NoiseReading::Precision,
            min_ess: 50.0,
        }
    }
}

/// Ground truth for one replicate. Climates and volatilities are row-major
/// (layer/increment first, dimension fastest); time steps are unit.
#[derive(Debug, Clone)]
pub struct SimulatedTruth {
    pub eta: Vec<f64>,
    pub phi: Vec<f64>,
    /// parameters handed to the engine (biased in scenarios 4a/4b)
    pub engine_eta: Vec<f64>,
    pub engine_phi: Vec<f64>,
    pub v: Vec<f64>,
    pub c: Vec<f64>,
}

impl SimulatedTruth {
    pub fn climate(&self, layer: usize, dim: usize) -> f64 {
        self.c[layer * self.eta.len() + dim]
    }
}

/// Simulated observations.
#[derive(Debug, Clone)]
pub enum PseudoData {
    Gaussian {
        /// row-major n x m
        y: Vec<f64>,
        /// per-layer noise parameter
        delta: Vec<f64>,
    },
    Zip {
        /// row-major n x 3 taxa counts
        counts: Vec<u64>,
        p: [f64; 3],
        a: [f64; 3],
    },
}

/// Draw truth and pseudo-observations for one replicate.
pub fn simulate_scenario<R: Rng + ?Sized>(
    scenario: Scenario,
    cfg: &ValidateConfig,
    rng: &mut R,
) -> Result<(SimulatedTruth, PseudoData)> {
    let (n, m) = (cfg.n, cfg.m);
    if scenario != Scenario::S1 && m != 3 {
        return Err(Error::invalid("ZIP scenarios are defined for m = 3".to_string()));
    }
    let eta: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..10.0)).collect();
    let phi: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..10.0)).collect();
    let mut v = vec![0.0; (n - 1) * m];
    for j in 0..m {
        let law = Ig2::new(eta[j], phi[j])?;
        for i in 0..n - 1 {
            v[i * m + j] = law.sample(rng);
        }
    }
    // c_1 = 0: the intrinsic walk is location-free, coverage is unaffected
    let mut c = vec![0.0; n * m];
    for i in 1..n {
        for j in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            c[i * m + j] = c[(i - 1) * m + j] + v[(i - 1) * m + j].sqrt() * z;
        }
    }
    let (engine_eta, engine_phi) = match scenario {
        Scenario::S4a => bias(&eta, &phi, 0.5..1.0, rng),
        Scenario::S4b => bias(&eta, &phi, 1.0..5.0, rng),
        _ => (eta.clone(), phi.clone()),
    };
    let data = match scenario {
        Scenario::S1 => {
            let delta: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..2.0)).collect();
            let mut y = vec![0.0; n * m];
            for i in 0..n {
                let sd = noise_sd(delta[i], cfg.noise_reading);
                for j in 0..m {
                    let z: f64 = rng.sample(StandardNormal);
                    y[i * m + j] = c[i * m + j] + sd * z;
                }
            }
            PseudoData::Gaussian { y, delta }
        }
        _ => {
            let p = [
                rng.random_range(0.0..0.2),
                rng.random_range(0.0..0.2),
                rng.random_range(0.0..0.2),
            ];
            let a = {
                let mut a = [0.0; 3];
                for slot in &mut a {
                    let z: f64 = rng.sample(StandardNormal);
                    *slot = z.abs();
                }
                a
            };
            let mut counts = vec![0u64; n * 3];
            for i in 0..n {
                let ci = &c[i * m..i * m + 3];
                for (taxon, rate) in zip_rates(ci, &a).into_iter().enumerate() {
                    counts[i * 3 + taxon] = Zip::new(p[taxon], rate)?.sample(rng);
                }
            }
            PseudoData::Zip { counts, p, a }
        }
    };
    Ok((
        SimulatedTruth {
            eta,
            phi,
            engine_eta,
            engine_phi,
            v,
            c,
        },
        data,
    ))
}

fn bias<R: Rng + ?Sized>(
    eta: &[f64],
    phi: &[f64],
    range: std::ops::Range<f64>,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let be: Vec<f64> = eta
        .iter()
        .map(|&e| e * rng.random_range(range.clone()))
        .collect();
    let bp: Vec<f64> = phi
        .iter()
        .map(|&p| p * rng.random_range(range.clone()))
        .collect();
    (be, bp)
}

fn noise_sd(delta: f64, reading: NoiseReading) -> f64 {
    match reading {
        NoiseReading::Precision => (1.0 / delta).sqrt(),
        NoiseReading::VarianceSqrtInv => (1.0 / delta).sqrt().sqrt(),
    }
}

/// The three taxa rates sqrt(a1 c1^2 + a2 c2^2), sqrt(a1 c1^2 + a3 c3^2),
/// sqrt(a1 c1^2 + a2 c2^2 + a3 c3^2).
pub fn zip_rates(c: &[f64], a: &[f64; 3]) -> [f64; 3] {
    let s1 = a[0] * c[0] * c[0];
    let s2 = a[1] * c[1] * c[1];
    let s3 = a[2] * c[2] * c[2];
    [(s1 + s2).sqrt(), (s1 + s3).sqrt(), (s1 + s2 + s3).sqrt()]
}

/// Sampling-importance-resampling draws from a likelihood over a flat
/// prior on `bounds`; returns the resampled points and the effective
/// sample size of the raw weights.
pub fn importance_mdp<R: Rng + ?Sized>(
    log_likelihood: &dyn Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    s: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, f64)> {
    if s < 2000 {
        return Err(Error::invalid(format!(
            "importance sampling needs at least 2000 draws, got {s}"
        )));
    }
    let m = bounds.len();
    let mut points = Vec::with_capacity(s);
    let mut logw = Vec::with_capacity(s);
    for _ in 0..s {
        let pt: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect();
        let lw = log_likelihood(&pt);
        points.push(pt);
        logw.push(lw);
    }
    let max_lw = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max_lw.is_finite() {
        return Err(Error::Numerical(
            "importance weights all vanish; the box misses the likelihood".to_string(),
        ));
    }
    let w: Vec<f64> = logw.iter().map(|&l| (l - max_lw).exp()).collect();
    let sum: f64 = w.iter().sum();
    let sum2: f64 = w.iter().map(|&x| x * x).sum();
    let ess = sum * sum / sum2;
    // cumulative inverse-CDF resampling
    let mut cum = Vec::with_capacity(s);
    let mut acc = 0.0;
    for &x in &w {
        acc += x;
        cum.push(acc);
    }
    let mut out = Vec::with_capacity(s);
    for _ in 0..s {
        let u = rng.random::<f64>() * sum;
        let idx = cum.partition_point(|&cw| cw < u).min(s - 1);
        out.push(points[idx].clone());
    }
    let _ = m;
    Ok((out, ess))
}

/// Per-layer log-likelihood of the ZIP observation model.
pub fn zip_log_likelihood(counts: &[u64], c: &[f64], p: &[f64; 3], a: &[f64; 3]) -> f64 {
    let rates = zip_rates(c, a);
    let mut acc = 0.0;
    for taxon in 0..3 {
        match Zip::new(p[taxon], rates[taxon]) {
            Ok(zip) => acc += zip.logpmf(counts[taxon]),
            Err(_) => return f64::NEG_INFINITY,
        }
    }
    acc
}

/// Truth-anchored flat-prior box: per dimension, the simulated climate
/// range widened by five marginal standard deviations.
pub fn truth_box(truth: &SimulatedTruth, n: usize, m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| truth.climate(i, j)).collect();
            let (_, sd) = crate::diag::mean_sd(&col);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let pad = 5.0 * sd.max(1e-6);
            (lo - pad, hi + pad)
        })
        .collect()
}

/// Build the mixture set for one simulated replicate; returns the number
/// of layers whose importance ESS fell under the configured floor.
pub fn build_mdps<R: Rng + ?Sized>(
    scenario: Scenario,
    truth: &SimulatedTruth,
    data: &PseudoData,
    cfg: &ValidateConfig,
    rng: &mut R,
) -> Result<(MixtureSet, usize)> {
    let (n, m) = (cfg.n, cfg.m);
    match data {
        PseudoData::Gaussian { y, delta } => {
            // conjugate: flat prior x Gaussian likelihood = Gaussian MDP
            let layers: Result<Vec<LayerMdp>> = (0..n)
                .map(|i| {
                    let sd = noise_sd(delta[i], cfg.noise_reading);
                    let precision = 1.0 / (sd * sd);
                    LayerMdp::new(
                        i + 1,
                        vec![MixtureComponent {
                            weight: 1.0,
                            mean: (0..m).map(|j| y[i * m + j]).collect(),
                            precision_diag: vec![precision; m],
                        }],
                    )
                })
                .collect();
            Ok((MixtureSet::new(layers?)?, 0))
        }
        PseudoData::Zip { counts, p, a } => {
            let g = scenario.mixture_components();
            let bounds = truth_box(truth, n, m);
            let mut flagged = 0usize;
            let mut layers = Vec::with_capacity(n);
            for i in 0..n {
                let row = &counts[i * 3..i * 3 + 3];
                let ll = |c: &[f64]| zip_log_likelihood(row, c, p, a);
                let (samples, ess) =
                    importance_mdp(&ll, &bounds, cfg.importance_samples, rng)?;
                if ess < cfg.min_ess {
                    flagged += 1;
                    log::warn!("layer {}: importance ESS {ess:.1} below {}", i + 1, cfg.min_ess);
                }
                let fit = fit_mixture_em(&samples, g, &cfg.em, rng)?;
                layers.push(LayerMdp::new(i + 1, fit.components)?);
            }
            Ok((MixtureSet::new(layers)?, flagged))
        }
    }
}

/// Coverage over one scenario.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub scenario: &'static str,
    pub detail: &'static str,
    pub cov90: f64,
    pub cov50: f64,
    pub replicates: usize,
    pub failed_replicates: usize,
    pub flagged_layers: usize,
}

struct ReplicateCounts {
    in90: u64,
    in50: u64,
    total: u64,
    flagged: usize,
}

fn run_replicate(
    scenario: Scenario,
    cfg: &ValidateConfig,
    rng: &mut Generator,
) -> Result<ReplicateCounts> {
    let (n, m) = (cfg.n, cfg.m);
    let (truth, data) = simulate_scenario(scenario, cfg, rng)?;
    let (mixtures, flagged) = build_mdps(scenario, &truth, &data, cfg, rng)?;
    let chron = ChronologySet::new(vec![(0..n).map(|i| i as f64).collect()])?;
    let config = EngineConfig {
        iters: cfg.engine_iters,
        burnin: cfg.engine_burnin,
        thin: cfg.engine_thin,
        eta: truth.engine_eta.clone(),
        phi: truth.engine_phi.clone(),
        fix_hyper: true,
        hyper: VolHyper::default(),
        proposal_sd: cfg.proposal_sd,
        adapt: true,
        scan: ScanOrder::Sequential,
    };
    let mut engine = Engine::init(&mixtures, &chron, config)?;
    let (records, _) = engine.run(rng)?;
    if records.is_empty() {
        return Err(Error::invalid("no retained records".to_string()));
    }
    // per-(layer, dim) climate draws across retained records
    let mut draws = vec![Vec::with_capacity(records.len()); n * m];
    for record in &records {
        let climate = draw_climate(record, &mixtures, rng)?;
        for (slot, &value) in draws.iter_mut().zip(&climate.c) {
            slot.push(value);
        }
    }
    let mut counts = ReplicateCounts {
        in90: 0,
        in50: 0,
        total: 0,
        flagged,
    };
    for i in 0..n {
        for j in 0..m {
            let slot = &mut draws[i * m + j];
            slot.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let truth_c = truth.climate(i, j);
            let q05 = crate::diag::quantile_sorted(slot, 0.05);
            let q95 = crate::diag::quantile_sorted(slot, 0.95);
            let q25 = crate::diag::quantile_sorted(slot, 0.25);
            let q75 = crate::diag::quantile_sorted(slot, 0.75);
            counts.total += 1;
            counts.in90 += u64::from((q05..=q95).contains(&truth_c));
            counts.in50 += u64::from((q25..=q75).contains(&truth_c));
        }
    }
    Ok(counts)
}

/// Run `replicates` independent replicates (in parallel, each on its own
/// derived stream) and pool the interval-coverage indicators. Failed
/// replicates are recorded and skipped, never abort the batch.
pub fn coverage_report(
    scenario: Scenario,
    replicates: usize,
    cfg: &ValidateConfig,
    master_seed: u64,
) -> Result<CoverageReport> {
    if replicates == 0 {
        return Err(Error::invalid("need at least one replicate".to_string()));
    }
    let results: Vec<Result<ReplicateCounts>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(master_seed, child_seed(0xC0FFEE, r as u64));
            run_replicate(scenario, cfg, &mut rng)
        })
        .collect();
    let mut in90 = 0u64;
    let mut in50 = 0u64;
    let mut total = 0u64;
    let mut failed = 0usize;
    let mut flagged = 0usize;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(c) => {
                in90 += c.in90;
                in50 += c.in50;
                total += c.total;
                flagged += c.flagged;
            }
            Err(e) => {
                log::warn!("replicate {r} failed: {e}");
                failed += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Numerical("every replicate failed".to_string()));
    }
    Ok(CoverageReport {
        scenario: scenario.id(),
        detail: scenario.detail(),
        cov90: in90 as f64 / total as f64,
        cov50: in50 as f64 / total as f64,
        replicates: replicates - failed,
        failed_replicates: failed,
        flagged_layers: flagged,
    })
}

/// Report CSV with the columns `scenario,detail,cov90,cov50,replicates`.
pub fn write_coverage_report<W: Write>(
    out: &mut W,
    reports: &[CoverageReport],
    header_lines: &[String],
) -> Result<()> {
    for h in header_lines {
        writeln!(out, "# {h}")?;
    }
    writeln!(out, "scenario,detail,cov90,cov50,replicates")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{:.4},{:.4},{}",
            r.scenario, r.detail, r.cov90, r.cov50, r.replicates
        )?;
    }
    Ok(())
}
