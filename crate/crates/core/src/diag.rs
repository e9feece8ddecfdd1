//! Numerical diagnostics and test oracles: adaptive quadrature,
//! Kolmogorov–Smirnov and chi-square goodness-of-fit tests, summary
//! statistics.
//!
//! These routines are deliberately independent of the sampler code paths
//! they are used to check.

use crate::special::{gamma_ur, std_normal_cdf};

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute
/// tolerance `tol` (relative to the running estimate). The first few
/// levels split unconditionally so narrow spikes between the initial
/// nodes cannot silently terminate the recursion.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adaptive_simpson_forced(f, a, b, tol, 6)
}

pub(crate) fn adaptive_simpson_forced(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    min_depth: u32,
) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        force: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || (force == 0 && delta.abs() <= 15.0 * tol) {
            left + right + delta / 15.0
        } else {
            let sub = force.saturating_sub(1);
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1, sub)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1, sub)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol.max(1e-300), 48, min_depth)
}

/// Integrate `f` over `[a, ∞)` by geometrically growing panels until the
/// last panel contributes less than `tol` relative to the running total.
pub fn integrate_to_inf(f: &dyn Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    let mut lo = a;
    let mut width = 1.0f64.max(a.abs() * 0.5);
    let mut total = 0.0;
    for _ in 0..80 {
        let hi = lo + width;
        let part = adaptive_simpson(f, lo, hi, tol * 0.05);
        total += part;
        if part.abs() < tol * (total.abs().max(1e-12)) && width > 4.0 {
            break;
        }
        lo = hi;
        width *= 2.0;
    }
    total
}

/// Integrate `f` over `(-∞, ∞)` splitting at `center`.
pub fn integrate_real_line(f: &dyn Fn(f64) -> f64, center: f64, tol: f64) -> f64 {
    let right = integrate_to_inf(f, center, tol);
    let reflected = move |t: f64| f(2.0 * center - t);
    let left = integrate_to_inf(&reflected, center, tol);
    left + right
}

/// Result of a goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution, P(K > t).
fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100u32 {
        let term = (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against the CDF `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> GofResult {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let fx = cdf(x);
        let hi = (i + 1) as f64 / n - fx;
        let lo = fx - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    // Stephens' small-sample adjustment
    let t = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    GofResult {
        statistic: d,
        p_value: kolmogorov_sf(t),
    }
}

/// One-sample KS test against a density known only through `log_pdf`, with
/// support starting at `lo`. The CDF is accumulated between consecutive
/// order statistics (7-point Gauss-Legendre per gap; the samples
/// themselves resolve the density's mass); the density must be normalized.
pub fn ks_test_against_logpdf(
    samples: &[f64],
    log_pdf: impl Fn(f64) -> f64,
    lo: f64,
) -> GofResult {
    const GL_X: [f64; 7] = [
        -0.9491079123427585,
        -0.7415311855993945,
        -0.4058451513773972,
        0.0,
        0.4058451513773972,
        0.7415311855993945,
        0.9491079123427585,
    ];
    const GL_W: [f64; 7] = [
        0.1294849661688697,
        0.2797053914892766,
        0.3818300505051189,
        0.4179591836734694,
        0.3818300505051189,
        0.2797053914892766,
        0.1294849661688697,
    ];
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pdf = |x: f64| {
        let l = log_pdf(x);
        if l.is_finite() {
            l.exp()
        } else {
            0.0
        }
    };
    let n = xs.len() as f64;
    // wide initial segment handled adaptively, tiny gaps by fixed Gauss
    let mut cum = adaptive_simpson(&pdf, lo, xs[0], 1e-12);
    let mut prev = xs[0];
    let mut d = (1.0 / n - cum).abs().max(cum);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        let half = 0.5 * (x - prev);
        let mid = 0.5 * (x + prev);
        if half > 0.0 {
            let mut part = 0.0;
            for (gx, gw) in GL_X.iter().zip(&GL_W) {
                part += gw * pdf(mid + half * gx);
            }
            cum += part * half;
        }
        prev = x;
        let fx = cum.clamp(0.0, 1.0);
        let hi = (i + 1) as f64 / n - fx;
        let lod = fx - i as f64 / n;
        d = d.max(hi).max(lod);
    }
    let t = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    GofResult {
        statistic: d,
        p_value: kolmogorov_sf(t),
    }
}

/// ∫ exp(log_pdf) over (0, ∞) via the substitution x = e^u, which keeps
/// sharply peaked positive-support densities resolvable.
pub fn density_mass_positive(log_pdf: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
    let g = |u: f64| {
        let lp = log_pdf(u.exp());
        if lp.is_finite() {
            (lp + u).exp()
        } else {
            0.0
        }
    };
    integrate_real_line(&g, 0.0, tol)
}

/// Two-sample KS test.
pub fn ks2_test(xs: &[f64], ys: &[f64]) -> GofResult {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (a.len() as f64, b.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    GofResult {
        statistic: d,
        p_value: kolmogorov_sf(d * (ne + 0.12 + 0.11 / ne)),
    }
}

/// Chi-square goodness of fit of observed `counts` against `probs`.
/// Cells with expected count below 5 are pooled into their neighbour.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> GofResult {
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let n = total as f64;
    let mut merged: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        acc_o += c as f64;
        acc_e += n * p;
        if acc_e >= 5.0 {
            merged.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let Some(last) = merged.last_mut() {
            last.0 += acc_o;
            last.1 += acc_e;
        } else {
            merged.push((acc_o, acc_e));
        }
    }
    let stat: f64 = merged
        .iter()
        .map(|&(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let df = (merged.len().max(2) - 1) as f64;
    GofResult {
        statistic: stat,
        p_value: gamma_ur(df / 2.0, stat / 2.0),
    }
}

/// Simple normality check via KS against the standard normal.
pub fn normality_test(samples: &[f64]) -> GofResult {
    ks_test(samples, std_normal_cdf)
}

/// Sample mean and (population) standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of an unsorted sample (type-7).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&s, q)
}

/// Type-7 quantile of an already sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Monte Carlo standard error of the mean accounting for autocorrelation,
/// by non-overlapping batch means.
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    let b = (n as f64).sqrt().floor() as usize;
    if b < 2 || n / b < 2 {
        let (_, sd) = mean_sd(xs);
        return sd / (n as f64).sqrt();
    }
    let k = n / b;
    let means: Vec<f64> = (0..k)
        .map(|i| xs[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let (_, sd) = mean_sd(&means);
    sd / (k as f64).sqrt() * (k as f64 / (k as f64 - 1.0)).sqrt()
}
