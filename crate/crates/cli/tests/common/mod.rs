#![allow(dead_code)] // each test binary uses a subset

//! Shared fixtures for the integration suites: synthetic mixture sets,
//! chronology pools, pipeline input files, and the bridge rejection oracle.

use nigclim::engine::ChronologySet;
use nigclim::mixtures::{LayerMdp, MixtureComponent, MixtureSet};
use nigclim::rng::seeded;
use rand::Rng;
use std::io::Write;
use std::path::Path;

/// A full-scale synthetic input: n layers of G diagonal components over m
/// dimensions, plus a pool of monotone chronologies spanning ~0-14 ka.
pub fn full_scale_fixture(
    n: usize,
    m: usize,
    g: usize,
    n_chron: usize,
    seed: u64,
) -> (MixtureSet, ChronologySet) {
    let mut rng = seeded(seed);
    let mut layers = Vec::with_capacity(n);
    let mut drift: Vec<f64> = vec![0.0; m];
    for i in 0..n {
        for d in drift.iter_mut() {
            *d += rng.random_range(-0.6..0.6);
        }
        let mut raw: Vec<f64> = (0..g).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for w in raw.iter_mut() {
            *w /= total;
        }
        // exact unit sum under the serialization rule
        let head = 1.0 - raw[1..].iter().sum::<f64>();
        raw[0] = head;
        let components = raw
            .iter()
            .map(|&w| MixtureComponent {
                weight: w,
                mean: drift
                    .iter()
                    .map(|&d| d + rng.random_range(-1.5..1.5))
                    .collect(),
                precision_diag: (0..m).map(|_| rng.random_range(0.3..4.0)).collect(),
            })
            .collect();
        layers.push(LayerMdp::new(i + 1, components).unwrap());
    }
    let mixtures = MixtureSet::new(layers).unwrap();

    let mut draws = Vec::with_capacity(n_chron);
    for _ in 0..n_chron {
        let mut t = Vec::with_capacity(n);
        let mut acc = rng.random_range(0.0..0.05);
        for _ in 0..n {
            acc += rng.random_range(0.04..0.21);
            t.push(acc);
        }
        draws.push(t);
    }
    (mixtures, ChronologySet::new(draws).unwrap())
}

/// Write `samples.csv` and `chrons.csv` pipeline inputs under `dir`.
pub fn write_pipeline_fixture(
    dir: &Path,
    n: usize,
    m: usize,
    samples_per_layer: usize,
    n_chron: usize,
    seed: u64,
) {
    let mut rng = seeded(seed);
    let mut samples = std::fs::File::create(dir.join("mdp_samples.csv")).unwrap();
    let cols: Vec<String> = (1..=m).map(|j| format!("c{j}")).collect();
    writeln!(samples, "layer,sample,{}", cols.join(",")).unwrap();
    let mut center: Vec<f64> = vec![0.0; m];
    for layer in 1..=n {
        for c in center.iter_mut() {
            *c += rng.random_range(-0.8..0.8);
        }
        for s in 1..=samples_per_layer {
            let vals: Vec<String> = center
                .iter()
                .map(|&c| format!("{:.6}", c + rng.random_range(-0.9..0.9)))
                .collect();
            writeln!(samples, "{layer},{s},{}", vals.join(",")).unwrap();
        }
    }

    let mut chrons = std::fs::File::create(dir.join("chronologies.csv")).unwrap();
    let head: Vec<String> = (1..=n).map(|i| format!("t{i}")).collect();
    writeln!(chrons, "{}", head.join(",")).unwrap();
    for _ in 0..n_chron {
        let mut acc = 0.0;
        let row: Vec<String> = (0..n)
            .map(|_| {
                acc += rng.random_range(0.1..0.35);
                format!("{acc:.4}")
            })
            .collect();
        writeln!(chrons, "{}", row.join(",")).unwrap();
    }
}

/// Rejection sampler against the product-of-IG-kernels bridge density.
pub fn bridge_rejection_oracle(
    v_total: f64,
    d1: f64,
    d2: f64,
    eta: f64,
    phi: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let a = d1 / (d1 + d2);
    let theta = phi * eta * (d1 + d2) * (d1 + d2) / v_total;
    let log_kernel = |w: f64| -> f64 {
        let s = w * (1.0 - w);
        -1.5 * s.ln() - 0.5 * theta * (a - w) * (a - w) / s
    };
    let mut log_max = f64::NEG_INFINITY;
    for k in 1..20_000 {
        log_max = log_max.max(log_kernel(k as f64 / 20_000.0));
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w: f64 = rng.random_range(1e-9..1.0 - 1e-9);
        if rng.random::<f64>().ln() <= log_kernel(w) - log_max {
            out.push(w * v_total);
        }
    }
    out
}
