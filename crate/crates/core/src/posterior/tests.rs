use super::*;
use crate::diag;
use crate::dists::Ig2;
use crate::lincore::DenseOracle;
use crate::mixtures::{LayerMdp, MixtureComponent, MixtureSet};
use crate::rng::seeded;
use rand::Rng;

fn point_mass_set(means: &[Vec<f64>], tau: f64) -> MixtureSet {
    let layers = means
        .iter()
        .enumerate()
        .map(|(i, mu)| {
            LayerMdp::new(
                i + 1,
                vec![MixtureComponent {
                    weight: 1.0,
                    mean: mu.clone(),
                    precision_diag: vec![tau; mu.len()],
                }],
            )
            .unwrap()
        })
        .collect();
    MixtureSet::new(layers).unwrap()
}

fn record_for(n: usize, m: usize, v: f64, eta: f64, phi: f64) -> ChainRecord {
    ChainRecord {
        iter: 1,
        chron_idx: 0,
        k: vec![0; n],
        v: vec![v; (n - 1) * m],
        eta: vec![eta; m],
        phi: vec![phi; m],
    }
}

/// Rejection sampler against the product-of-IG-kernels bridge density,
/// the independent correctness anchor for ig_bridge_split.
fn bridge_rejection_oracle(
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

#[test]
fn bridge_matches_rejection_oracle() {
    let cases = [
        (1.3, 0.5, 0.5, 1.0, 1.0),
        (2.0, 0.2, 0.8, 2.66, 15.33),
        (5.0, 1.0, 3.0, 0.5, 0.3),
        (0.12, 0.05, 0.05, 2.0, 10.0),
    ];
    let mut rng = seeded(401);
    for (v, d1, d2, eta, phi) in cases {
        let direct: Vec<f64> = (0..100_000)
            .map(|_| ig_bridge_split(v, d1, d2, eta, phi, &mut rng).0)
            .collect();
        let oracle = bridge_rejection_oracle(v, d1, d2, eta, phi, 100_000, &mut rng);
        let r = diag::ks2_test(&direct, &oracle);
        assert!(
            r.p_value > 0.01,
            "v={v} d1={d1} d2={d2}: KS D={} p={}",
            r.statistic,
            r.p_value
        );
    }
}

#[test]
fn bridge_additivity_bit_exact() {
    let mut rng = seeded(402);
    for _ in 0..200_000 {
        let v: f64 = rng.random_range(-18.0..18.0f64).exp();
        let d1: f64 = rng.random_range(0.01..3.0);
        let d2: f64 = rng.random_range(0.01..3.0);
        let (v1, v2) = ig_bridge_split(v, d1, d2, 1.3, 4.0, &mut rng);
        assert!(v1 > 0.0 && v2 > 0.0);
        assert_eq!(v1 + v2, v, "v1={v1} v2={v2} v={v}");
    }
}

#[test]
fn bridge_symmetric_split_is_symmetric() {
    let mut rng = seeded(403);
    let v = 2.4;
    let halves: Vec<f64> = (0..100_000)
        .map(|_| ig_bridge_split(v, 0.7, 0.7, 1.5, 3.0, &mut rng).0)
        .collect();
    let (mean, sd) = diag::mean_sd(&halves);
    let se = sd / (halves.len() as f64).sqrt();
    assert!((mean - v / 2.0).abs() < 4.0 * se, "mean {mean}");
    // v1 and v - v1 must share their law
    let reflected: Vec<f64> = halves.iter().map(|&x| v - x).collect();
    let r = diag::ks2_test(&halves, &reflected);
    assert!(r.p_value > 0.01, "p={}", r.p_value);
}

#[test]
fn bridge_prior_recovery() {
    // splitting an Ig2(eta (d1+d2), phi (d1+d2)) total must reproduce the
    // Ig2(eta d1, phi d1) marginal for the left piece
    let (eta, phi, d1, d2) = (2.0, 6.0, 0.3, 0.7);
    let total_law = Ig2::new(eta * (d1 + d2), phi * (d1 + d2)).unwrap();
    let left_law = Ig2::new(eta * d1, phi * d1).unwrap();
    let mut rng = seeded(404);
    let lefts: Vec<f64> = (0..60_000)
        .map(|_| {
            let v = total_law.sample(&mut rng);
            ig_bridge_split(v, d1, d2, eta, phi, &mut rng).0
        })
        .collect();
    let direct: Vec<f64> = (0..60_000).map(|_| left_law.sample(&mut rng)).collect();
    let r = diag::ks2_test(&lefts, &direct);
    assert!(r.p_value > 0.01, "KS D={} p={}", r.statistic, r.p_value);
}

#[test]
fn brownian_bridge_pins_and_scales() {
    let mut rng = seeded(405);
    // v1 -> 0 returns the left endpoint
    let x = brownian_bridge_point(2.5, -4.0, 1e-300, 1.0, &mut rng);
    assert!((x - 2.5).abs() < 1e-140);
    // zero endpoints, unit halves: N(0, 1/2)
    let draws: Vec<f64> = (0..200_000)
        .map(|_| brownian_bridge_point(0.0, 0.0, 1.0, 1.0, &mut rng))
        .collect();
    let (mean, sd) = diag::mean_sd(&draws);
    assert!(mean.abs() < 0.01);
    assert!((sd * sd - 0.5).abs() < 0.01);
}

#[test]
fn brownian_bridge_matches_conditioned_walk() {
    // brute force: simulate two-step Gaussian walks, keep those whose sum
    // lands near the conditioning value, compare moments
    let (v1, v2) = (0.8f64, 1.7f64);
    let (c_l, c_r) = (1.0, -0.5);
    let total_step = c_r - c_l;
    let mut rng = seeded(406);
    let mut kept = Vec::new();
    let tol = 0.01;
    while kept.len() < 20_000 {
        let z1: f64 = rng.sample::<f64, _>(StandardNormal) * v1.sqrt();
        let z2: f64 = rng.sample::<f64, _>(StandardNormal) * v2.sqrt();
        if (z1 + z2 - total_step).abs() < tol {
            kept.push(c_l + z1);
        }
    }
    let (bm, bs) = diag::mean_sd(&kept);
    let direct: Vec<f64> = (0..200_000)
        .map(|_| brownian_bridge_point(c_l, c_r, v1, v2, &mut rng))
        .collect();
    let (dm, ds) = diag::mean_sd(&direct);
    let se = bs / (kept.len() as f64).sqrt();
    assert!((bm - dm).abs() < 4.0 * se + 0.01, "{bm} vs {dm}");
    assert!((bs - ds).abs() < 0.02, "{bs} vs {ds}");
}

#[test]
fn climate_draw_collapses_on_point_mass_mdps() {
    let means: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, -(i as f64)]).collect();
    let mixtures = point_mass_set(&means, 1e12);
    let record = record_for(5, 2, 0.5, 1.0, 2.0);
    let mut rng = seeded(407);
    let draw = draw_climate(&record, &mixtures, &mut rng).unwrap();
    for i in 0..5 {
        for j in 0..2 {
            assert!(
                (draw.value(i, j) - means[i][j]).abs() < 1e-4,
                "({i},{j}): {} vs {}",
                draw.value(i, j),
                means[i][j]
            );
        }
    }
}

#[test]
fn climate_draw_moments_match_dense_oracle() {
    let means: Vec<Vec<f64>> = vec![
        vec![0.5],
        vec![-1.0],
        vec![2.0],
        vec![0.0],
        vec![1.0],
    ];
    let mixtures = point_mass_set(&means, 1.3);
    let mut record = record_for(5, 1, 1.0, 1.0, 2.0);
    record.v = vec![0.4, 1.1, 0.7, 2.0];
    let mu: Vec<f64> = means.iter().map(|m| m[0]).collect();
    let tau = vec![1.3; 5];
    let oracle = DenseOracle::new(&mu, &tau, &record.v).unwrap();
    let dmu: Vec<f64> = mu.iter().map(|&m| m * 1.3).collect();
    let expect_mean = oracle.solve(&dmu);

    let mut rng = seeded(408);
    let n_draws = 20_000;
    let mut sums = [0.0; 5];
    let mut sums2 = [0.0; 5];
    let mut cross = [0.0; 4];
    for _ in 0..n_draws {
        let d = draw_climate(&record, &mixtures, &mut rng).unwrap();
        for i in 0..5 {
            sums[i] += d.value(i, 0);
            sums2[i] += d.value(i, 0) * d.value(i, 0);
        }
        for i in 0..4 {
            cross[i] += d.value(i, 0) * d.value(i + 1, 0);
        }
    }
    for i in 0..5 {
        let mean = sums[i] / n_draws as f64;
        let var = sums2[i] / n_draws as f64 - mean * mean;
        let v_ii = oracle.v_entry(i, i);
        let se = (v_ii / n_draws as f64).sqrt();
        assert!((mean - expect_mean[i]).abs() < 4.0 * se, "mean[{i}]");
        assert!((var - v_ii).abs() < 0.05 * v_ii, "var[{i}]: {var} vs {v_ii}");
    }
    for i in 0..4 {
        let cov = cross[i] / n_draws as f64 - (sums[i] / n_draws as f64) * (sums[i + 1] / n_draws as f64);
        let expect = oracle.v_entry(i, i + 1);
        assert!(
            (cov - expect).abs() < 0.05 * expect.abs().max(0.05),
            "lag1[{i}]: {cov} vs {expect}"
        );
    }
}

#[test]
fn aligned_grid_reproduces_knots_exactly() {
    // chronology sits exactly on grid points; cell volatility equals the
    // knot increment's v and interpolated c equals the drawn c
    let n = 4;
    let chron = ChronologySet::new(vec![vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
    let mut record = record_for(n, 1, 1.0, 1.5, 3.0);
    record.v = vec![0.7, 1.9, 0.4];
    let climate = ClimateDraw {
        m: 1,
        c: vec![0.0, 1.0, -1.0, 0.5],
    };
    let grid = GridSpec::new(0.0, 3.0, 1.0).unwrap();
    let mut rng = seeded(409);
    let gp = interpolate(&[record.clone()], std::slice::from_ref(&climate), &chron, &grid, &mut rng).unwrap();
    for i in 0..n {
        assert_eq!(gp.c_value(0, 0, i), Some(climate.c[i]));
    }
    for i in 0..n - 1 {
        assert_eq!(gp.vol_value(0, 0, i), Some(record.v[i].sqrt()));
    }
}

#[test]
fn conservation_and_additivity() {
    let n = 6;
    let chron = ChronologySet::new(vec![vec![0.13, 0.91, 1.42, 2.77, 3.01, 4.6]]).unwrap();
    let mut record = record_for(n, 2, 1.0, 1.5, 3.0);
    let mut rng = seeded(410);
    for x in record.v.iter_mut() {
        *x = rng.random_range(0.1..2.0);
    }
    let climate = ClimateDraw {
        m: 2,
        c: (0..n * 2).map(|i| (i as f64 * 0.77).sin()).collect(),
    };
    // grid covers the whole span, so every piece lands in some cell
    let grid = GridSpec::new(0.0, 5.0, 0.25).unwrap();
    let gp = interpolate(&[record.clone()], &[climate], &chron, &grid, &mut rng).unwrap();
    for j in 0..2 {
        let allocated = gp.mass_allocated[j];
        let expected = gp.mass_expected[j];
        assert!(
            (allocated - expected).abs() < 1e-10 * expected.max(1.0),
            "dim {j}: {allocated} vs {expected}"
        );
        let direct: f64 = record.vol_column(j).iter().sum();
        assert!((expected - direct).abs() < 1e-12);
    }
}

#[test]
fn mid_increment_cell_matches_direct_split() {
    // one increment [0, 1] with a single interior boundary at 0.4: the
    // recursive path and a direct split must agree in distribution
    let chron = ChronologySet::new(vec![vec![0.0, 1.0]]).unwrap();
    let (eta, phi, v_total) = (1.2, 4.0, 0.9);
    let grid = GridSpec::new(0.0, 1.0, 0.4).unwrap();
    // grid points 0.0, 0.4, 0.8; interior boundaries 0.4 and 0.8
    let mut rng = seeded(411);
    let mut from_interp = Vec::with_capacity(30_000);
    for _ in 0..30_000 {
        let record = ChainRecord {
            iter: 1,
            chron_idx: 0,
            k: vec![0, 0],
            v: vec![v_total],
            eta: vec![eta],
            phi: vec![phi],
        };
        let climate = ClimateDraw { m: 1, c: vec![0.0, 0.0] };
        let gp = interpolate(&[record], &[climate], &chron, &grid, &mut rng).unwrap();
        // cell [0.0, 0.4]: mass = v(0, 0.4)
        let vol = gp.vol_value(0, 0, 0).unwrap();
        from_interp.push(vol * vol);
    }
    let direct: Vec<f64> = (0..30_000)
        .map(|_| ig_bridge_split(v_total, 0.4, 0.6, eta, phi, &mut rng).0)
        .collect();
    let r = diag::ks2_test(&from_interp, &direct);
    assert!(r.p_value > 0.01, "KS D={} p={}", r.statistic, r.p_value);
}

#[test]
fn refinement_aggregates_consistently() {
    // halving the grid step: aggregated fine cells must both conserve mass
    // exactly and match the coarse-cell law
    let chron = ChronologySet::new(vec![vec![0.0, 2.0]]).unwrap();
    let (eta, phi, v_total) = (1.0, 2.5, 1.4);
    let coarse = GridSpec::new(0.0, 2.0, 1.0).unwrap();
    let fine = GridSpec::new(0.0, 2.0, 0.5).unwrap();
    let mut rng = seeded(412);
    let mut coarse_first = Vec::with_capacity(20_000);
    let mut fine_agg_first = Vec::with_capacity(20_000);
    for _ in 0..20_000 {
        let record = ChainRecord {
            iter: 1,
            chron_idx: 0,
            k: vec![0, 0],
            v: vec![v_total],
            eta: vec![eta],
            phi: vec![phi],
        };
        let climate = ClimateDraw { m: 1, c: vec![0.0, 0.0] };
        let gc = interpolate(std::slice::from_ref(&record), std::slice::from_ref(&climate), &chron, &coarse, &mut rng)
            .unwrap();
        coarse_first.push(gc.vol_value(0, 0, 0).unwrap().powi(2));
        let gf = interpolate(&[record], &[climate], &chron, &fine, &mut rng).unwrap();
        let agg: f64 = gf.vol_value(0, 0, 0).unwrap().powi(2) + gf.vol_value(0, 0, 1).unwrap().powi(2);
        fine_agg_first.push(agg);
        let total: f64 = (0..4).map(|p| gf.vol_value(0, 0, p).unwrap().powi(2)).sum();
        assert!((total - v_total).abs() < 1e-10);
    }
    let r = diag::ks2_test(&coarse_first, &fine_agg_first);
    assert!(r.p_value > 0.01, "KS D={} p={}", r.statistic, r.p_value);
}

#[test]
fn masking_outside_span() {
    // chronology spans [1.0, 2.0] but the grid runs [0, 3]: outside points
    // and partially covered cells are missing
    let chron = ChronologySet::new(vec![vec![1.0, 1.5, 2.0]]).unwrap();
    let record = ChainRecord {
        iter: 1,
        chron_idx: 0,
        k: vec![0; 3],
        v: vec![0.5, 0.5],
        eta: vec![1.0],
        phi: vec![1.0],
    };
    let climate = ClimateDraw { m: 1, c: vec![0.0, 1.0, 0.0] };
    let grid = GridSpec::new(0.0, 3.0, 0.25).unwrap();
    let mut rng = seeded(413);
    let gp = interpolate(&[record], &[climate], &chron, &grid, &mut rng).unwrap();
    for p in 0..gp.n_points() {
        let g = gp.grid[p];
        let c = gp.c_value(0, 0, p);
        if !(1.0..=2.0).contains(&g) {
            assert!(c.is_none(), "point {g} should be masked");
        } else {
            assert!(c.is_some(), "point {g} should be present");
        }
    }
    for cell in 0..gp.n_points() - 1 {
        let (lo, hi) = (gp.grid[cell], gp.grid[cell + 1]);
        let v = gp.vol_value(0, 0, cell);
        if lo >= 1.0 && hi <= 2.0 {
            assert!(v.is_some(), "cell [{lo},{hi}] should be present");
        } else {
            assert!(v.is_none(), "cell [{lo},{hi}] should be masked");
        }
    }
}

#[test]
fn grid_point_count_matches_span() {
    let grid = GridSpec::new(0.0, 14.0, 0.1).unwrap();
    assert_eq!(grid.points().len(), 141);
    let g2 = GridSpec::new(0.0, 3.0, 1.0).unwrap();
    assert_eq!(g2.points(), vec![0.0, 1.0, 2.0, 3.0]);
}

#[test]
fn no_overlap_is_an_error() {
    let chron = ChronologySet::new(vec![vec![10.0, 11.0]]).unwrap();
    let record = ChainRecord {
        iter: 1,
        chron_idx: 0,
        k: vec![0, 0],
        v: vec![1.0],
        eta: vec![1.0],
        phi: vec![1.0],
    };
    let climate = ClimateDraw { m: 1, c: vec![0.0, 0.0] };
    let grid = GridSpec::new(0.0, 1.0, 0.5).unwrap();
    let mut rng = seeded(414);
    assert!(interpolate(&[record], &[climate], &chron, &grid, &mut rng).is_err());
}

#[test]
fn out_of_range_component_index_is_an_error() {
    let mixtures = point_mass_set(&[vec![0.0], vec![1.0], vec![2.0]], 1.0);
    let mut record = record_for(3, 1, 1.0, 1.0, 1.0);
    record.k[1] = 5;
    let err = draw_climate(&record, &mixtures, &mut seeded(1)).unwrap_err();
    assert!(err.to_string().contains("component 6 at layer 2"), "{err}");
}
