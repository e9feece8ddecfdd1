//! Pipeline stage implementations behind the subcommands.
//!
//! Each stage writes to `<path>.partial` and renames on success, so an
//! aborted run leaves its partial outputs flagged rather than mixed with
//! good ones.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use nigclim::engine::{self, ChronologySet, Engine, EngineConfig};
use nigclim::icecore::{self, IceConfig, IceHyper, SeriesData};
use nigclim::mixtures::{self, EmConfig, LayerMdp, MixtureSet};
use nigclim::posterior::{self, GridSpec};
use nigclim::rng::{child_seed, substream};
use nigclim::validate::{self, Scenario, ValidateConfig};
use nigclim::volhyper::VolHyper;
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

// stage tags for independent rng substreams
const STAGE_FIT_MIX: u64 = 1;
const STAGE_RUN: u64 = 2;
const STAGE_INTERP: u64 = 3;
const STAGE_ICECORE: u64 = 4;

/// Write-then-rename guard: the `.partial` file survives on failure.
struct PartialFile {
    target: PathBuf,
    partial: PathBuf,
    writer: Option<BufWriter<File>>,
}

impl PartialFile {
    fn create(target: &Path) -> Result<Self> {
        let partial = partial_path(target);
        let file = File::create(&partial)
            .with_context(|| format!("cannot create {}", partial.display()))?;
        Ok(Self {
            target: target.to_path_buf(),
            partial,
            writer: Some(BufWriter::new(file)),
        })
    }

    fn writer(&mut self) -> &mut BufWriter<File> {
        self.writer.as_mut().expect("writer taken")
    }

    fn commit(mut self) -> Result<()> {
        let mut w = self.writer.take().expect("writer taken");
        w.flush()?;
        drop(w);
        std::fs::rename(&self.partial, &self.target)
            .with_context(|| format!("cannot finalize {}", self.target.display()))?;
        Ok(())
    }
}

pub fn partial_path(target: &Path) -> PathBuf {
    let mut name = target.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    target.with_file_name(name)
}

/// Stage 3: fit per-layer Gaussian mixtures to the MDP samples.
pub fn cmd_fit_mix(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let samples = mixtures::read_mdp_samples(&cfg.path("mdp_samples"))?;
    let g = cfg.usize_key("em_components")?;
    samples.validate(10 * g)?;
    let em = EmConfig {
        restarts: cfg.usize_key("em_restarts")?,
        tol: cfg.f64_key("em_tol")?,
        ..EmConfig::default()
    };
    let stage_seed = child_seed(seed, STAGE_FIT_MIX);
    let fits: Vec<_> = samples
        .layers
        .par_iter()
        .enumerate()
        .map(|(i, layer)| {
            let mut rng = substream(stage_seed, i as u64);
            mixtures::fit_mixture_em(layer, g, &em, &mut rng).map(|fit| (i, fit))
        })
        .collect::<nigclim::Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(fits.len());
    for (i, fit) in fits {
        log::info!(
            "layer {}: G={} log-likelihood {:.3} over {} samples",
            i + 1,
            fit.fitted_components,
            fit.log_likelihood,
            samples.layers[i].len()
        );
        layers.push(LayerMdp::new(i + 1, fit.components)?);
    }
    let set = MixtureSet::new(layers)?;
    let mut out = PartialFile::create(&cfg.path("mixture_out"))?;
    mixtures::write_mixtures(out.writer(), &set, &[cfg.header_line()?])?;
    out.commit()?;
    log::info!(
        "fit-mix: {} layers x {} dims -> {}",
        set.n_layers(),
        set.dim(),
        cfg.path("mixture_out").display()
    );
    Ok(())
}

fn engine_config(cfg: &RunConfig, m: usize) -> Result<EngineConfig> {
    Ok(EngineConfig {
        iters: cfg.usize_key("iters")?,
        burnin: cfg.usize_key("burnin")?,
        thin: cfg.usize_key("thin")?,
        eta: cfg.f64_vec_key("eta", m)?,
        phi: cfg.f64_vec_key("phi", m)?,
        fix_hyper: cfg.bool_key("fix_hyper")?,
        hyper: VolHyper {
            a_eta: cfg.f64_key("a_eta")?,
            b_eta: cfg.f64_key("b_eta")?,
            a_phi: cfg.f64_key("a_phi")?,
            b_phi: cfg.f64_key("b_phi")?,
        },
        proposal_sd: cfg.f64_key("proposal_sd")?,
        adapt: cfg.bool_key("adapt")?,
        scan: cfg.scan_order()?,
    })
}

/// Stage 4: the marginalized MCMC run, streaming records to disk.
pub fn cmd_run(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let set = mixtures::read_mixtures(&cfg.path("mixture_out"))?;
    let chron = ChronologySet::from_csv(&cfg.path("chronologies"))?;
    let config = engine_config(cfg, set.dim())?;
    let n = set.n_layers();
    let m = set.dim();
    let mut engine = Engine::init(&set, &chron, config)?;
    let mut rng = substream(seed, STAGE_RUN);
    let mut out = PartialFile::create(&cfg.path("chain_out"))?;
    writeln!(out.writer(), "# {}", cfg.header_line()?)?;
    writeln!(out.writer(), "{}", engine::chain_header(n, m))?;
    let stats = engine.run_streaming(&mut rng, |record| {
        let mut fields: Vec<String> = Vec::with_capacity(2 + n + (n - 1) * m + 2 * m);
        fields.push(record.iter.to_string());
        fields.push(record.chron_idx.to_string());
        for &k in &record.k {
            fields.push((k + 1).to_string());
        }
        for &v in &record.v {
            fields.push(v.to_string());
        }
        for &e in &record.eta {
            fields.push(e.to_string());
        }
        for &p in &record.phi {
            fields.push(p.to_string());
        }
        writeln!(out.writer(), "{}", fields.join(","))
            .map_err(nigclim::Error::from)
    })?;
    out.commit()?;
    log::info!(
        "run: {} records retained, volatility acceptance {:.3}, indicator acceptance {:.3}, final proposal sd {:.4}",
        stats.retained,
        stats.acceptance.vol_rate(),
        stats.acceptance.indicator_rate(),
        stats.proposal_sd
    );
    Ok(())
}

/// Stages 5-6: climate draws per retained record, then grid interpolation.
pub fn cmd_interp(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let set = mixtures::read_mixtures(&cfg.path("mixture_out"))?;
    let chron = ChronologySet::from_csv(&cfg.path("chronologies"))?;
    let records = engine::read_chain(&cfg.path("chain_out"))?;
    let grid = GridSpec::new(
        cfg.f64_key("grid_start")?,
        cfg.f64_key("grid_end")?,
        cfg.f64_key("grid_step")?,
    )?;
    let mut rng = substream(seed, STAGE_INTERP);
    let mut climates = Vec::with_capacity(records.len());
    for record in &records {
        climates.push(posterior::draw_climate(record, &set, &mut rng)?);
    }
    let gp = posterior::interpolate(&records, &climates, &chron, &grid, &mut rng)?;
    let header = [cfg.header_line()?];
    let mut grid_out = PartialFile::create(&cfg.path("grid_out"))?;
    posterior::write_grid(grid_out.writer(), &gp, &header)?;
    grid_out.commit()?;
    let mut summary_out = PartialFile::create(&cfg.grid_summary_path())?;
    posterior::write_grid_summary(summary_out.writer(), &gp, &header)?;
    summary_out.commit()?;
    log::info!(
        "interp: {} records x {} grid points -> {} and {}",
        gp.n_records(),
        gp.n_points(),
        cfg.path("grid_out").display(),
        cfg.grid_summary_path().display()
    );
    Ok(())
}

/// The observed-series Gibbs sampler.
pub fn cmd_icecore(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let data = SeriesData::from_csv(&cfg.path("series"), cfg.bool_key("standardize")?)?;
    let hyper = IceHyper {
        vol: VolHyper {
            a_eta: cfg.f64_key("a_eta")?,
            b_eta: cfg.f64_key("b_eta")?,
            a_phi: cfg.f64_key("a_phi")?,
            b_phi: cfg.f64_key("b_phi")?,
        },
        tau_mu: cfg.f64_key("tau_mu")?,
        tau_beta: cfg.f64_key("tau_beta")?,
    };
    let config = IceConfig {
        iters: cfg.usize_key("ice_iters")?,
        burnin: cfg.usize_key("ice_burnin")?,
        thin: cfg.usize_key("ice_thin")?,
        psi_form: cfg.psi_form()?,
    };
    let mut rng = substream(seed, STAGE_ICECORE);
    let chain = icecore::run(&data, &hyper, &config, &mut rng)?;
    let n = data.len();
    let mut out = PartialFile::create(&cfg.path("icecore_out"))?;
    writeln!(out.writer(), "# {}", cfg.header_line()?)?;
    let mut cols = vec![
        "iter".to_string(),
        "mu".to_string(),
        "beta".to_string(),
        "eta".to_string(),
        "phi".to_string(),
    ];
    for i in 1..n {
        cols.push(format!("v_{i}"));
    }
    writeln!(out.writer(), "{}", cols.join(","))?;
    for (idx, state) in chain.iter().enumerate() {
        let iter = config.burnin + (idx + 1) * config.thin;
        let mut fields = vec![
            iter.to_string(),
            state.mu.to_string(),
            state.beta.to_string(),
            state.eta.to_string(),
            state.phi.to_string(),
        ];
        for &v in &state.v {
            fields.push(v.to_string());
        }
        writeln!(out.writer(), "{}", fields.join(","))?;
    }
    out.commit()?;
    let eta_mean = chain.iter().map(|s| s.eta).sum::<f64>() / chain.len() as f64;
    let phi_mean = chain.iter().map(|s| s.phi).sum::<f64>() / chain.len() as f64;
    log::info!(
        "icecore: {} records, posterior means eta {:.3}, phi {:.3}",
        chain.len(),
        eta_mean,
        phi_mean
    );
    Ok(())
}

/// Simulated coverage validation.
pub fn cmd_validate(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let scenario = Scenario::parse(cfg.str_key("scenario"))?;
    let replicates = cfg.usize_key("replicates")?;
    let vcfg = ValidateConfig {
        n: cfg.usize_key("validate_n")?,
        m: 3,
        importance_samples: cfg.usize_key("importance_samples")?,
        em: EmConfig {
            restarts: 4,
            tol: cfg.f64_key("em_tol")?,
            ..EmConfig::default()
        },
        engine_iters: cfg.usize_key("validate_iters")?,
        engine_burnin: cfg.usize_key("validate_burnin")?,
        engine_thin: cfg.usize_key("validate_thin")?,
        proposal_sd: cfg.f64_key("proposal_sd")?,
        noise_reading: cfg.noise_reading()?,
        min_ess: 50.0,
    };
    let report = validate::coverage_report(scenario, replicates, &vcfg, seed)?;
    log::info!(
        "validate scenario {}: cov90 {:.4}, cov50 {:.4}, {} replicates ({} failed, {} flagged layers)",
        report.scenario,
        report.cov90,
        report.cov50,
        report.replicates,
        report.failed_replicates,
        report.flagged_layers
    );
    let mut out = PartialFile::create(&cfg.path("validate_out"))?;
    validate::write_coverage_report(out.writer(), &[report], &[cfg.header_line()?])?;
    out.commit()?;
    Ok(())
}

/// Stages 2-6 in sequence (chronology construction is upstream by design).
pub fn cmd_all(cfg: &RunConfig) -> Result<()> {
    cmd_fit_mix(cfg)?;
    cmd_run(cfg)?;
    cmd_interp(cfg)?;
    Ok(())
}
