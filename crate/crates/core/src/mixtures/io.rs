//! File formats for MDP samples and fitted mixtures.
//!
//! MDP sample files are CSV with header `layer,sample,c1,...,cm`; layers are
//! 1-based and contiguous. Mixture files are a JSON array over layers; all
//! numbers are written with 17 significant digits so write -> read -> write
//! is byte-identical. Lines starting with `#` ahead of the payload are
//! metadata comments and are skipped on read.

use super::{LayerMdp, MdpSamples, MixtureComponent, MixtureSet};
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Read an MDP sample CSV.
pub fn read_mdp_samples(path: &Path) -> Result<MdpSamples> {
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 3 || &headers[0] != "layer" || &headers[1] != "sample" {
        return Err(Error::Parse(format!(
            "{}: expected header layer,sample,c1,...,cm",
            path.display()
        )));
    }
    let m = headers.len() - 2;
    for (j, h) in headers.iter().skip(2).enumerate() {
        if h != format!("c{}", j + 1) {
            return Err(Error::Parse(format!(
                "{}: column {} named {h}, expected c{}",
                path.display(),
                j + 3,
                j + 1
            )));
        }
    }

    let mut layers: Vec<Vec<Vec<f64>>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let line = record
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".into());
        if record.len() != m + 2 {
            return Err(Error::Parse(format!(
                "{} line {line}: {} fields, expected {}",
                path.display(),
                record.len(),
                m + 2
            )));
        }
        let layer: usize = record[0].parse().map_err(|_| {
            Error::Parse(format!("{} line {line}: bad layer index {:?}", path.display(), &record[0]))
        })?;
        if layer == 0 || layer > layers.len() + 1 {
            return Err(Error::Parse(format!(
                "{} line {line}: layer indices must be 1-based and contiguous, got {layer} after {}",
                path.display(),
                layers.len()
            )));
        }
        if layer == layers.len() + 1 {
            layers.push(Vec::new());
        }
        let mut c = Vec::with_capacity(m);
        for j in 0..m {
            let x: f64 = record[j + 2].parse().map_err(|_| {
                Error::Parse(format!(
                    "{} line {line}: bad number {:?} in c{}",
                    path.display(),
                    &record[j + 2],
                    j + 1
                ))
            })?;
            c.push(x);
        }
        layers[layer - 1].push(c);
    }
    if layers.is_empty() {
        return Err(Error::Parse(format!("{}: no sample rows", path.display())));
    }
    Ok(MdpSamples { m, layers })
}

fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Write a mixture set as JSON, one layer object per line, preceded by the
/// given metadata comment lines.
pub fn write_mixtures<W: Write>(out: &mut W, set: &MixtureSet, header_lines: &[String]) -> Result<()> {
    for h in header_lines {
        writeln!(out, "# {h}")?;
    }
    writeln!(out, "[")?;
    let n = set.n_layers();
    for (i, layer) in set.layers().iter().enumerate() {
        let comps: Vec<String> = layer
            .components()
            .iter()
            .map(|c| {
                format!(
                    "{{\"weight\": {}, \"mean\": [{}], \"precision_diag\": [{}]}}",
                    fmt17(c.weight),
                    c.mean.iter().map(|&x| fmt17(x)).collect::<Vec<_>>().join(", "),
                    c.precision_diag
                        .iter()
                        .map(|&x| fmt17(x))
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            })
            .collect();
        let comma = if i + 1 < n { "," } else { "" };
        writeln!(
            out,
            "{{\"layer\": {}, \"components\": [{}]}}{comma}",
            layer.layer,
            comps.join(", ")
        )?;
    }
    writeln!(out, "]")?;
    Ok(())
}

#[derive(serde::Deserialize)]
struct LayerJson {
    layer: usize,
    components: Vec<ComponentJson>,
}

#[derive(serde::Deserialize)]
struct ComponentJson {
    weight: f64,
    mean: Vec<f64>,
    precision_diag: Vec<f64>,
}

/// Read a mixture JSON file (skipping leading `#` comment lines) and
/// validate the schema.
pub fn read_mixtures(path: &Path) -> Result<MixtureSet> {
    let file = std::fs::File::open(path)?;
    let mut payload = String::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim_start().starts_with('#') {
            continue;
        }
        payload.push_str(&line);
        payload.push('\n');
    }
    parse_mixtures(&payload).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub(crate) fn parse_mixtures(payload: &str) -> Result<MixtureSet> {
    let raw: Vec<LayerJson> =
        serde_json::from_str(payload).map_err(|e| Error::Parse(format!("invalid mixture JSON: {e}")))?;
    let layers: Result<Vec<LayerMdp>> = raw
        .into_iter()
        .map(|l| {
            let comps = l
                .components
                .into_iter()
                .map(|c| MixtureComponent {
                    weight: c.weight,
                    mean: c.mean,
                    precision_diag: c.precision_diag,
                })
                .collect();
            LayerMdp::new(l.layer, comps)
        })
        .collect();
    MixtureSet::new(layers?)
}

/// Convenience: read a whole mixture file from any reader.
pub fn read_mixtures_from<R: Read>(reader: R) -> Result<MixtureSet> {
    let mut payload = String::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if line.trim_start().starts_with('#') {
            continue;
        }
        payload.push_str(&line);
        payload.push('\n');
    }
    parse_mixtures(&payload)
}
