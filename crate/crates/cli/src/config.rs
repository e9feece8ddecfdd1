//! Flat key=value run configuration with command-line overrides.
//!
//! Every key has a default except `seed`, which is mandatory: outputs must
//! be reproducible, so wall-clock seeding does not exist. The effective
//! configuration (defaults included) is hashed into every output header.

use anyhow::{bail, Context, Result};
use nigclim::engine::ScanOrder;
use nigclim::icecore::VolPsiForm;
use nigclim::validate::NoiseReading;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// (key, default, description) table; the single source of truth for
/// parsing, `--help` text, and the config hash.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    ("mdp_samples", "mdp_samples.csv", "MDP sample CSV (layer,sample,c1,...,cm)"),
    ("chronologies", "chronologies.csv", "chronology draw CSV (header t1,...,tn)"),
    ("mixture_out", "mixtures.json", "fitted mixture JSON path"),
    ("chain_out", "chain.csv", "engine chain CSV path"),
    ("grid_out", "grid.csv", "per-iteration grid CSV path"),
    ("grid_summary_out", "", "grid summary CSV path (default: grid_out stem + .summary.csv)"),
    ("series", "series.csv", "observed series CSV (time_ka,value) for the icecore command"),
    ("icecore_out", "icecore_chain.csv", "icecore chain CSV path"),
    ("validate_out", "coverage.csv", "coverage report CSV path"),
    ("iters", "100000", "engine iterations"),
    ("burnin", "20000", "engine burn-in iterations"),
    ("thin", "40", "engine thinning stride"),
    ("eta", "2.66", "per-dimension eta, comma separated or one value for all"),
    ("phi", "15.33", "per-dimension phi, comma separated or one value for all"),
    ("fix_hyper", "true", "keep eta and phi fixed during the engine run"),
    ("a_eta", "0.01", "Gamma shape prior for eta (fix_hyper=false)"),
    ("b_eta", "0.01", "Gamma rate prior for eta (fix_hyper=false)"),
    ("a_phi", "0.01", "Gamma shape prior for phi (fix_hyper=false)"),
    ("b_phi", "0.01", "Gamma rate prior for phi (fix_hyper=false)"),
    ("proposal_sd", "1.0", "initial log-scale random-walk proposal sd"),
    ("adapt", "true", "adapt proposal sd toward 0.44 acceptance during burn-in"),
    ("scan", "sequential", "volatility sweep order: sequential or random"),
    ("grid_start", "0", "grid start (ka BP)"),
    ("grid_end", "14", "grid end (ka BP)"),
    ("grid_step", "0.1", "grid step (ka)"),
    ("em_components", "5", "mixture components per layer (G)"),
    ("em_restarts", "10", "EM restarts per layer"),
    ("em_tol", "1e-8", "EM relative log-likelihood convergence tolerance"),
    ("standardize", "true", "standardize the icecore series to mean 0, sd 1"),
    ("psi_form", "derived", "icecore v conditional linear weight: derived or printed"),
    ("ice_iters", "100000", "icecore iterations"),
    ("ice_burnin", "20000", "icecore burn-in"),
    ("ice_thin", "80", "icecore thinning stride"),
    ("tau_mu", "0.01", "icecore drift prior precision"),
    ("tau_beta", "0.01", "icecore skew prior precision"),
    ("scenario", "1", "validation scenario: 1, 2, 3, 4a or 4b"),
    ("replicates", "200", "validation replicates"),
    ("importance_samples", "3000", "importance draws per layer (ZIP scenarios)"),
    ("noise_reading", "precision", "scenario-1 delta reading: precision or variance-sqrt-inv"),
    ("validate_n", "100", "validation layers per replicate"),
    ("validate_iters", "4000", "validation engine iterations"),
    ("validate_burnin", "1000", "validation engine burn-in"),
    ("validate_thin", "15", "validation engine thinning stride"),
    ("threads", "0", "worker threads (0 = all cores)"),
    ("seed", "", "master seed (mandatory; no wall-clock seeding)"),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn defaults() -> Self {
        let values = CONFIG_KEYS
            .iter()
            .map(|(k, d, _)| (k.to_string(), d.to_string()))
            .collect();
        Self { values }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::defaults();
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{} line {}: expected key=value", path.display(), lineno + 1);
            };
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("{} line {}", path.display(), lineno + 1))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !CONFIG_KEYS.iter().any(|(k, _, _)| *k == key) {
            bail!("unknown config key {key:?}");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_default()
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.raw(key))
    }

    pub fn str_key(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn grid_summary_path(&self) -> PathBuf {
        let explicit = self.raw("grid_summary_out");
        if !explicit.is_empty() {
            return PathBuf::from(explicit);
        }
        let grid = self.path("grid_out");
        let stem = grid
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "grid".into());
        grid.with_file_name(format!("{stem}.summary.csv"))
    }

    pub fn usize_key(&self, key: &str) -> Result<usize> {
        self.raw(key)
            .parse()
            .with_context(|| format!("config key {key}={:?} is not a count", self.raw(key)))
    }

    pub fn f64_key(&self, key: &str) -> Result<f64> {
        self.raw(key)
            .parse()
            .with_context(|| format!("config key {key}={:?} is not a number", self.raw(key)))
    }

    pub fn bool_key(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => bail!("config key {key}={other:?} is not a boolean"),
        }
    }

    /// Comma-separated positive reals, broadcast to `m` when one value.
    pub fn f64_vec_key(&self, key: &str, m: usize) -> Result<Vec<f64>> {
        let parts: Vec<f64> = self
            .raw(key)
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("config key {key}={:?} is not a number list", self.raw(key)))?;
        if parts.len() == m {
            Ok(parts)
        } else if parts.len() == 1 {
            Ok(vec![parts[0]; m])
        } else {
            bail!(
                "config key {key} has {} entries but the data has {m} dimensions",
                parts.len()
            );
        }
    }

    pub fn seed(&self) -> Result<u64> {
        let raw = self.raw("seed");
        if raw.is_empty() {
            bail!("seed is mandatory (set seed= in the config or pass --seed)");
        }
        raw.parse()
            .with_context(|| format!("seed {raw:?} is not an unsigned integer"))
    }

    pub fn threads(&self) -> Result<usize> {
        self.usize_key("threads")
    }

    pub fn scan_order(&self) -> Result<ScanOrder> {
        match self.raw("scan") {
            "sequential" => Ok(ScanOrder::Sequential),
            "random" => Ok(ScanOrder::Random),
            other => bail!("scan must be sequential or random, got {other:?}"),
        }
    }

    pub fn psi_form(&self) -> Result<VolPsiForm> {
        match self.raw("psi_form") {
            "derived" => Ok(VolPsiForm::Derived),
            "printed" => Ok(VolPsiForm::AsPrinted),
            other => bail!("psi_form must be derived or printed, got {other:?}"),
        }
    }

    pub fn noise_reading(&self) -> Result<NoiseReading> {
        match self.raw("noise_reading") {
            "precision" => Ok(NoiseReading::Precision),
            "variance-sqrt-inv" => Ok(NoiseReading::VarianceSqrtInv),
            other => bail!("noise_reading must be precision or variance-sqrt-inv, got {other:?}"),
        }
    }

    /// Canonical `key=value` listing of the effective configuration.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Short hash of the effective configuration for output headers.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The metadata comment line carried by every output file.
    pub fn header_line(&self) -> Result<String> {
        Ok(format!(
            "nigclim {} config={} seed={}",
            env!("CARGO_PKG_VERSION"),
            self.hash(),
            self.seed()?
        ))
    }
}

/// Render the key table for `--help`.
pub fn config_help() -> String {
    let mut out = String::from("Config keys (key=value file plus --set overrides):\n");
    for (k, d, desc) in CONFIG_KEYS {
        let default = if d.is_empty() { "(unset)" } else { d };
        out.push_str(&format!("  {k:<20} {desc} [default: {default}]\n"));
    }
    out
}
