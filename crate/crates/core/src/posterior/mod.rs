//! Posterior path reconstruction and grid interpolation.
//!
//! Stage 5 draws the latent climate path for each retained record from
//! `N(V D mu, V)` per dimension; stage 6 splits each increment's squared
//! volatility at every interior grid boundary with the Inverse-Gaussian
//! bridge, aggregates the pieces into grid cells, and fills in climate at
//! the grid points with the matching Brownian bridge. Cells or points not
//! fully inside a record's chronology span are reported as missing, never
//! extrapolated.

use crate::diag::quantile_sorted;
use crate::engine::{ChainRecord, ChronologySet};
use crate::error::{Error, Result};
use crate::lincore::MarginalState;
use crate::mixtures::MixtureSet;
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::Write;

/// Regular output grid in ka BP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && step.is_finite()) {
            return Err(Error::invalid("grid bounds must be finite".to_string()));
        }
        if start >= end || start.is_nan() || end.is_nan() {
            return Err(Error::invalid(format!("grid start {start} must precede end {end}")));
        }
        if step <= 0.0 || step.is_nan() {
            return Err(Error::invalid(format!("grid step must be positive, got {step}")));
        }
        Ok(Self { start, end, step })
    }

    /// Grid points start, start+step, ... up to end (inclusive within a
    /// small tolerance for floating rounding).
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.end - self.start) / self.step + 1.0 + 1e-9).floor() as usize;
        (0..count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// Latent climate values for one retained record, aligned with its
/// chronology; row-major n x m.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateDraw {
    pub m: usize,
    pub c: Vec<f64>,
}

impl ClimateDraw {
    pub fn value(&self, layer: usize, dim: usize) -> f64 {
        self.c[layer * self.m + dim]
    }

    pub fn column(&self, dim: usize) -> Vec<f64> {
        self.c.iter().skip(dim).step_by(self.m).copied().collect()
    }
}

/// Exact draw of the latent path given one retained record: per dimension,
/// mean by one tridiagonal solve, noise by back-substitution.
pub fn draw_climate<R: Rng + ?Sized>(
    record: &ChainRecord,
    mixtures: &MixtureSet,
    rng: &mut R,
) -> Result<ClimateDraw> {
    let n = mixtures.n_layers();
    let m = mixtures.dim();
    if record.n_layers() != n || record.dims() != m {
        return Err(Error::DimensionMismatch(format!(
            "record has {} layers x {} dims, mixtures have {n} x {m}",
            record.n_layers(),
            record.dims()
        )));
    }
    for (i, layer) in mixtures.layers().iter().enumerate() {
        if record.k[i] >= layer.n_components() {
            return Err(Error::DimensionMismatch(format!(
                "record names component {} at layer {}, which has only {}",
                record.k[i] + 1,
                i + 1,
                layer.n_components()
            )));
        }
    }
    let mut c = vec![0.0; n * m];
    let mut path = vec![0.0; n];
    for j in 0..m {
        let mut mu = Vec::with_capacity(n);
        let mut tau = Vec::with_capacity(n);
        for layer in mixtures.layers() {
            let comp = &layer.components()[record.k[layer.layer - 1]];
            mu.push(comp.mean[j]);
            tau.push(comp.precision_diag[j]);
        }
        let state = MarginalState::new(mu, tau, record.vol_column(j))?;
        state.sample_path(rng, &mut path);
        for i in 0..n {
            c[i * m + j] = path[i];
        }
    }
    Ok(ClimateDraw { m, c })
}

/// Split a squared-volatility increment `v_total` over (d1, d2) by the
/// Inverse-Gaussian bridge: the conditional law of v1 given v1 + v2 =
/// v_total with v1 ~ Ig2(eta d1, phi d1), v2 ~ Ig2(eta d2, phi d2)
/// independent.
///
/// Exact chi-square root-selection construction: with
/// `theta = phi eta (d1+d2)^2 / v_total` and `a = d1/(d1+d2)`, the
/// recentred exponent statistic is exactly chi-square(1); given it, the
/// proportion w = v1/v_total takes one of the two roots of
/// `theta (a-w)^2 = q w(1-w)`, the lower with probability
/// `h(w+)/(h(w-)+h(w+))` where `h(w) = a + (1-2a) w`.
/// Additivity is bit-exact: v1 + v2 == v_total.
pub fn ig_bridge_split<R: Rng + ?Sized>(
    v_total: f64,
    d1: f64,
    d2: f64,
    eta: f64,
    phi: f64,
    rng: &mut R,
) -> (f64, f64) {
    debug_assert!(v_total > 0.0 && d1 > 0.0 && d2 > 0.0 && eta > 0.0 && phi > 0.0);
    let a = d1 / (d1 + d2);
    let theta = phi * eta * (d1 + d2) * (d1 + d2) / v_total;
    let z: f64 = rng.sample(StandardNormal);
    let u = z * z / theta;
    let disc = (u * u + 4.0 * a * (1.0 - a) * u).sqrt();
    let w_lo = ((2.0 * a + u) - disc) / (2.0 * (1.0 + u));
    let w_hi = ((2.0 * a + u) + disc) / (2.0 * (1.0 + u));
    let h_lo = a + (1.0 - 2.0 * a) * w_lo;
    let h_hi = a + (1.0 - 2.0 * a) * w_hi;
    let pick: f64 = rng.random();
    let w = if pick <= h_hi / (h_lo + h_hi) { w_lo } else { w_hi };
    let w = w.clamp(1e-15, 1.0 - 1e-15);
    let v1 = w * v_total;
    let v2 = v_total - v1;
    // recompute v1 so that v1 + v2 reproduces v_total bit-for-bit
    (v_total - v2, v2)
}

/// Brownian bridge at an interior point: given endpoint values and the
/// squared-volatility split (v1, v2), the value is
/// `N(c_l + v1/(v1+v2) (c_r - c_l), v1 v2/(v1+v2))`.
pub fn brownian_bridge_point<R: Rng + ?Sized>(
    c_left: f64,
    c_right: f64,
    v1: f64,
    v2: f64,
    rng: &mut R,
) -> f64 {
    debug_assert!(v1 >= 0.0 && v2 >= 0.0 && v1 + v2 > 0.0);
    let total = v1 + v2;
    let mean = c_left + v1 / total * (c_right - c_left);
    let sd = (v1 * v2 / total).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    mean + sd * z
}

/// Interpolated paths and per-cell volatilities over all retained records.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    pub grid: Vec<f64>,
    pub m: usize,
    pub iters: Vec<usize>,
    /// NaN encodes missing; indexed (record, dim, point)
    c: Vec<f64>,
    /// NaN encodes missing; indexed (record, dim, cell); cell p spans
    /// [grid[p], grid[p+1]]
    vol: Vec<f64>,
    /// bridged squared-volatility mass summed over all cells, per
    /// (record, dim), including cells later masked from the report
    pub mass_allocated: Vec<f64>,
    /// total squared volatility of the record, per (record, dim)
    pub mass_expected: Vec<f64>,
}

impl GridPosterior {
    pub fn n_records(&self) -> usize {
        self.iters.len()
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    fn idx(&self, rec: usize, dim: usize, point: usize) -> usize {
        (rec * self.m + dim) * self.grid.len() + point
    }

    pub fn c_value(&self, rec: usize, dim: usize, point: usize) -> Option<f64> {
        let x = self.c[self.idx(rec, dim, point)];
        if x.is_nan() {
            None
        } else {
            Some(x)
        }
    }

    pub fn vol_value(&self, rec: usize, dim: usize, cell: usize) -> Option<f64> {
        if cell + 1 >= self.grid.len() {
            return None;
        }
        let x = self.vol[self.idx(rec, dim, cell)];
        if x.is_nan() {
            None
        } else {
            Some(x)
        }
    }
}

/// Stage 6: split every increment's volatility at the interior grid
/// boundaries, aggregate per cell, and bridge climate at the grid points.
pub fn interpolate<R: Rng + ?Sized>(
    records: &[ChainRecord],
    climates: &[ClimateDraw],
    chronologies: &ChronologySet,
    grid: &GridSpec,
    rng: &mut R,
) -> Result<GridPosterior> {
    if records.is_empty() {
        return Err(Error::invalid("no records to interpolate".to_string()));
    }
    if records.len() != climates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} records vs {} climate draws",
            records.len(),
            climates.len()
        )));
    }
    let points = grid.points();
    let n_points = points.len();
    if n_points < 2 {
        return Err(Error::invalid("grid needs at least two points".to_string()));
    }
    let m = records[0].dims();
    let n = records[0].n_layers();
    if chronologies.n_ages() != n {
        return Err(Error::DimensionMismatch(format!(
            "chronologies have {} ages, records have {n} layers",
            chronologies.n_ages()
        )));
    }

    let n_rec = records.len();
    let mut out = GridPosterior {
        grid: points.clone(),
        m,
        iters: records.iter().map(|r| r.iter).collect(),
        c: vec![f64::NAN; n_rec * m * n_points],
        vol: vec![f64::NAN; n_rec * m * n_points],
        mass_allocated: vec![0.0; n_rec * m],
        mass_expected: vec![0.0; n_rec * m],
    };

    // cell index containing x, when inside the grid range
    let cell_of = |x: f64| -> Option<usize> {
        if x < points[0] || x >= points[n_points - 1] {
            return None;
        }
        let raw = ((x - grid.start) / grid.step).floor() as usize;
        Some(raw.min(n_points - 2))
    };
    // first grid index with points[idx] strictly greater than x
    let first_point_above = |x: f64| -> usize { points.partition_point(|&g| g <= x) };

    let mut any_overlap = false;
    for (r, (record, climate)) in records.iter().zip(climates).enumerate() {
        let times = chronologies.draw(record.chron_idx);
        let span = (times[0], times[n - 1]);
        for j in 0..m {
            let eta = record.eta[j];
            let phi = record.phi[j];
            let base = (r * m + j) * n_points;
            let mut cell_mass = vec![0.0f64; n_points - 1];
            let mut cell_touched = vec![false; n_points - 1];
            let mut expected = 0.0;

            // knot-coincident grid points pin to the drawn values
            for (i, &t) in times.iter().enumerate() {
                let k = ((t - grid.start) / grid.step).round() as i64;
                if k >= 0 && (k as usize) < n_points && points[k as usize] == t {
                    out.c[base + k as usize] = climate.value(i, j);
                    any_overlap = true;
                }
            }

            for i in 0..n - 1 {
                let v_total = record.vol(i, j);
                expected += v_total;
                let (t_lo, t_hi) = (times[i], times[i + 1]);
                let mut left = t_lo;
                let mut c_left = climate.value(i, j);
                let c_right = climate.value(i + 1, j);
                let mut remaining = v_total;
                let mut p = first_point_above(t_lo);
                while p < n_points && points[p] < t_hi {
                    let b = points[p];
                    let d1 = b - left;
                    let d2 = t_hi - b;
                    let (v1, v2) = ig_bridge_split(remaining, d1, d2, eta, phi, rng);
                    let c_b = brownian_bridge_point(c_left, c_right, v1, v2, rng);
                    out.c[base + p] = c_b;
                    any_overlap = true;
                    if left >= points[0] {
                        if let Some(cell) = cell_of(left) {
                            cell_mass[cell] += v1;
                            cell_touched[cell] = true;
                        }
                    }
                    left = b;
                    c_left = c_b;
                    remaining = v2;
                    p += 1;
                }
                // trailing piece [left, t_hi)
                if let Some(cell) = cell_of(left) {
                    cell_mass[cell] += remaining;
                    cell_touched[cell] = true;
                }
            }

            // mask: a cell is reported only when fully inside the span
            for p in 0..n_points - 1 {
                if cell_touched[p] && points[p] >= span.0 && points[p + 1] <= span.1 {
                    out.vol[base + p] = cell_mass[p].sqrt();
                }
            }
            let slot = r * m + j;
            out.mass_allocated[slot] = cell_mass.iter().sum();
            out.mass_expected[slot] = expected;
        }
    }
    if !any_overlap {
        return Err(Error::invalid(
            "grid does not overlap any record's chronology span".to_string(),
        ));
    }
    Ok(out)
}

/// Per-iteration grid CSV: `grid_ka,dim,iter,c,vol` with empty fields for
/// missing values.
pub fn write_grid<W: Write>(out: &mut W, gp: &GridPosterior, header_lines: &[String]) -> Result<()> {
    for h in header_lines {
        writeln!(out, "# {h}")?;
    }
    writeln!(out, "grid_ka,dim,iter,c,vol")?;
    for (r, &iter) in gp.iters.iter().enumerate() {
        for dim in 0..gp.m {
            for p in 0..gp.n_points() {
                let c = gp
                    .c_value(r, dim, p)
                    .map(|x| x.to_string())
                    .unwrap_or_default();
                let vol = gp
                    .vol_value(r, dim, p)
                    .map(|x| x.to_string())
                    .unwrap_or_default();
                writeln!(out, "{},{},{},{},{}", gp.grid[p], dim + 1, iter, c, vol)?;
            }
        }
    }
    Ok(())
}

/// Summary CSV:
/// `grid_ka,dim,c_mean,c_lo95,c_hi95,vol_lo95,vol_hi95,n_present`.
/// `n_present` counts iterations with a climate value at the point; the
/// volatility columns summarize the cell starting at the point.
pub fn write_grid_summary<W: Write>(
    out: &mut W,
    gp: &GridPosterior,
    header_lines: &[String],
) -> Result<()> {
    for h in header_lines {
        writeln!(out, "# {h}")?;
    }
    writeln!(out, "grid_ka,dim,c_mean,c_lo95,c_hi95,vol_lo95,vol_hi95,n_present")?;
    let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for dim in 0..gp.m {
        for p in 0..gp.n_points() {
            let mut cs: Vec<f64> = (0..gp.n_records())
                .filter_map(|r| gp.c_value(r, dim, p))
                .collect();
            let mut vols: Vec<f64> = (0..gp.n_records())
                .filter_map(|r| gp.vol_value(r, dim, p))
                .collect();
            cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vols.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n_present = cs.len();
            let (c_mean, c_lo, c_hi) = if cs.is_empty() {
                (None, None, None)
            } else {
                let mean = cs.iter().sum::<f64>() / cs.len() as f64;
                (
                    Some(mean),
                    Some(quantile_sorted(&cs, 0.025)),
                    Some(quantile_sorted(&cs, 0.975)),
                )
            };
            let (v_lo, v_hi) = if vols.is_empty() {
                (None, None)
            } else {
                (
                    Some(quantile_sorted(&vols, 0.025)),
                    Some(quantile_sorted(&vols, 0.975)),
                )
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                gp.grid[p],
                dim + 1,
                fmt(c_mean),
                fmt(c_lo),
                fmt(c_hi),
                fmt(v_lo),
                fmt(v_hi),
                n_present
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
