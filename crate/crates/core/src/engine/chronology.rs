//! Chronology draws: monotone age vectors sampled upstream from an
//! age-depth model and ingested here as a fixed pool (feedback to the
//! age-depth model is deliberately cut).

use crate::error::{Error, Result};
use std::io::BufReader;
use std::path::Path;

/// R draws of n strictly increasing ages (ka BP).
#[derive(Debug, Clone, PartialEq)]
pub struct ChronologySet {
    n: usize,
    draws: Vec<Vec<f64>>,
}

impl ChronologySet {
    pub fn new(draws: Vec<Vec<f64>>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::invalid("chronology set needs at least one draw".to_string()));
        }
        let n = draws[0].len();
        if n < 2 {
            return Err(Error::invalid("chronologies need at least two ages".to_string()));
        }
        for (r, row) in draws.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "chronology draw {} has {} ages, expected {n}",
                    r + 1,
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("chronology draw {} has non-finite age", r + 1)));
            }
            if row.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid(format!(
                    "chronology draw {} is not strictly increasing",
                    r + 1
                )));
            }
        }
        Ok(Self { n, draws })
    }

    /// CSV with header `t1,...,tn`, one row per draw.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(BufReader::new(file));
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let n = headers.len();
        for (j, h) in headers.iter().enumerate() {
            if h != format!("t{}", j + 1) {
                return Err(Error::Parse(format!(
                    "{}: column {} named {h}, expected t{}",
                    path.display(),
                    j + 1,
                    j + 1
                )));
            }
        }
        let mut draws = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let line = record
                .position()
                .map(|p| p.line().to_string())
                .unwrap_or_else(|| "?".into());
            if record.len() != n {
                return Err(Error::Parse(format!(
                    "{} line {line}: {} fields, expected {n}",
                    path.display(),
                    record.len()
                )));
            }
            let mut row = Vec::with_capacity(n);
            for field in record.iter() {
                let x: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!("{} line {line}: bad age {field:?}", path.display()))
                })?;
                row.push(x);
            }
            if row.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Parse(format!(
                    "{} line {line}: ages not strictly increasing",
                    path.display()
                )));
            }
            draws.push(row);
        }
        Self::new(draws)
    }

    pub fn n_ages(&self) -> usize {
        self.n
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn draw(&self, idx: usize) -> &[f64] {
        &self.draws[idx]
    }

    /// Write `deltas[i] = t_{i+1} - t_i` for draw `idx`.
    pub fn deltas_into(&self, idx: usize, deltas: &mut [f64]) {
        let row = &self.draws[idx];
        for (i, d) in deltas.iter_mut().enumerate() {
            *d = row[i + 1] - row[i];
        }
    }
}
