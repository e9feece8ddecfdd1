//! Retained MCMC states and their CSV representation.
//!
//! Chain files are CSV with header
//! `iter,chron_idx,k_1..k_n,v_1_1..v_{n-1}_m,eta_1..eta_m,phi_1..phi_m`;
//! component indices are written 1-based, volatilities iterate the layer
//! increment index first and the climate dimension fastest.

use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// One retained state of the marginalized sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub iter: usize,
    pub chron_idx: usize,
    /// 0-based component index per layer.
    pub k: Vec<usize>,
    /// Row-major (n-1) x m: v[i * m + j] is increment i, dimension j.
    pub v: Vec<f64>,
    pub eta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl ChainRecord {
    pub fn n_layers(&self) -> usize {
        self.k.len()
    }

    pub fn dims(&self) -> usize {
        self.eta.len()
    }

    pub fn vol(&self, increment: usize, dim: usize) -> f64 {
        self.v[increment * self.dims() + dim]
    }

    /// Volatility column for one climate dimension.
    pub fn vol_column(&self, dim: usize) -> Vec<f64> {
        let m = self.dims();
        self.v.iter().skip(dim).step_by(m).copied().collect()
    }
}

pub fn chain_header(n: usize, m: usize) -> String {
    let mut cols = vec!["iter".to_string(), "chron_idx".to_string()];
    for i in 1..=n {
        cols.push(format!("k_{i}"));
    }
    for i in 1..n {
        for j in 1..=m {
            cols.push(format!("v_{i}_{j}"));
        }
    }
    for j in 1..=m {
        cols.push(format!("eta_{j}"));
    }
    for j in 1..=m {
        cols.push(format!("phi_{j}"));
    }
    cols.join(",")
}

/// Write records with metadata comment lines ahead of the header.
pub fn write_chain<W: Write>(
    out: &mut W,
    records: &[ChainRecord],
    n: usize,
    m: usize,
    header_lines: &[String],
) -> Result<()> {
    for h in header_lines {
        writeln!(out, "# {h}")?;
    }
    writeln!(out, "{}", chain_header(n, m))?;
    for r in records {
        let mut fields: Vec<String> = Vec::with_capacity(2 + n + (n - 1) * m + 2 * m);
        fields.push(r.iter.to_string());
        fields.push(r.chron_idx.to_string());
        for &k in &r.k {
            fields.push((k + 1).to_string());
        }
        for &v in &r.v {
            fields.push(format!("{v}"));
        }
        for &e in &r.eta {
            fields.push(format!("{e}"));
        }
        for &p in &r.phi {
            fields.push(format!("{p}"));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Read a chain file written by [`write_chain`].
pub fn read_chain(path: &Path) -> Result<Vec<ChainRecord>> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if line.trim_start().starts_with('#') || line.trim().is_empty() {
                    continue;
                }
                break line;
            }
            None => return Err(Error::Parse(format!("{}: empty chain file", path.display()))),
        }
    };
    let cols: Vec<&str> = header.split(',').collect();
    let n = cols.iter().filter(|c| c.starts_with("k_")).count();
    let m = cols.iter().filter(|c| c.starts_with("eta_")).count();
    if n == 0 || m == 0 || cols.len() != 2 + n + (n - 1) * m + 2 * m {
        return Err(Error::Parse(format!(
            "{}: malformed chain header ({} columns, n={n}, m={m})",
            path.display(),
            cols.len()
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse(format!(
                "{} line {}: {} fields, expected {}",
                path.display(),
                lineno + 2,
                fields.len(),
                cols.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| {
                Error::Parse(format!("{} line {}: bad number {s:?}", path.display(), lineno + 2))
            })
        };
        let parse_u = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| {
                Error::Parse(format!("{} line {}: bad index {s:?}", path.display(), lineno + 2))
            })
        };
        let iter = parse_u(fields[0])?;
        let chron_idx = parse_u(fields[1])?;
        let mut k = Vec::with_capacity(n);
        for f in &fields[2..2 + n] {
            let one_based = parse_u(f)?;
            if one_based == 0 {
                return Err(Error::Parse(format!(
                    "{} line {}: component indices are 1-based",
                    path.display(),
                    lineno + 2
                )));
            }
            k.push(one_based - 1);
        }
        let mut v = Vec::with_capacity((n - 1) * m);
        for f in &fields[2 + n..2 + n + (n - 1) * m] {
            v.push(parse_f(f)?);
        }
        let mut eta = Vec::with_capacity(m);
        for f in &fields[2 + n + (n - 1) * m..2 + n + (n - 1) * m + m] {
            eta.push(parse_f(f)?);
        }
        let mut phi = Vec::with_capacity(m);
        for f in &fields[2 + n + (n - 1) * m + m..] {
            phi.push(parse_f(f)?);
        }
        out.push(ChainRecord {
            iter,
            chron_idx,
            k,
            v,
            eta,
            phi,
        });
    }
    Ok(out)
}
