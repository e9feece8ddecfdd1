//! Marginal data posteriors as finite Gaussian mixtures.
//!
//! Each layer's MDP sample cloud is fitted with a diagonal-covariance
//! Gaussian mixture by EM; the fitted components feed the marginalized
//! inference engine through their per-dimension slices. Diagonal component
//! precisions are mandatory on the inference path because the marginalized
//! posterior factorizes over climate dimensions only for diagonal tau.

mod em;
mod io;

pub use em::{fit_mixture_em, EmConfig, EmFit};
pub use io::{read_mdp_samples, read_mixtures, read_mixtures_from, write_mixtures};

use crate::error::{Error, Result};
use crate::special::{log_sum_exp, LN_2PI};

/// One Gaussian mixture component with diagonal precision.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub precision_diag: Vec<f64>,
}

impl MixtureComponent {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log-density of this component at `c` (weight not included).
    pub fn logpdf(&self, c: &[f64]) -> f64 {
        debug_assert_eq!(c.len(), self.mean.len());
        let mut acc = -0.5 * self.mean.len() as f64 * LN_2PI;
        for ((x, m), t) in c.iter().zip(&self.mean).zip(&self.precision_diag) {
            let d = x - m;
            acc += 0.5 * t.ln() - 0.5 * t * d * d;
        }
        acc
    }
}

/// The per-dimension view of a component used by the marginalized engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceComponent {
    pub weight: f64,
    pub mean: f64,
    pub precision: f64,
}

/// Fitted mixture for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMdp {
    /// 1-based layer index as it appears in the sample file.
    pub layer: usize,
    components: Vec<MixtureComponent>,
}

impl LayerMdp {
    /// Components are stored sorted by weight descending, ties broken by
    /// first mean coordinate, so serialization round-trips exactly.
    pub fn new(layer: usize, mut components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid(format!("layer {layer}: no mixture components")));
        }
        let m = components[0].dim();
        let mut weight_sum = 0.0;
        for c in &components {
            if c.dim() != m || c.precision_diag.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "layer {layer}: inconsistent component dimensions"
                )));
            }
            if c.precision_diag.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                return Err(Error::invalid(format!(
                    "layer {layer}: non-positive component precision"
                )));
            }
            if c.mean.iter().any(|x| !x.is_finite()) || !c.weight.is_finite() || c.weight < 0.0 {
                return Err(Error::invalid(format!("layer {layer}: bad component")));
            }
            weight_sum += c.weight;
        }
        if (weight_sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "layer {layer}: weights sum to {weight_sum}, expected 1"
            )));
        }
        components.sort_by(|a, b| {
            b.weight
                .partial_cmp(&a.weight)
                .unwrap()
                .then(a.mean[0].partial_cmp(&b.mean[0]).unwrap())
        });
        Ok(Self { layer, components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// log sum_g p_g N(c; mu_g, diag(tau_g)^{-1}), log-sum-exp stabilized.
    pub fn logpdf(&self, c: &[f64]) -> Result<f64> {
        if c.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has dimension {}, mixture has {}",
                c.len(),
                self.dim()
            )));
        }
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|g| g.weight.ln() + g.logpdf(c))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    /// The j-th coordinate of every component; weights unchanged.
    pub fn marginal_slices(&self, j: usize) -> Result<Vec<SliceComponent>> {
        if j >= self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "dimension {j} out of range for m={}",
                self.dim()
            )));
        }
        Ok(self
            .components
            .iter()
            .map(|c| SliceComponent {
                weight: c.weight,
                mean: c.mean[j],
                precision: c.precision_diag[j],
            })
            .collect())
    }

    /// Index of the heaviest component (first under the ordering rule).
    pub fn max_weight_component(&self) -> usize {
        0
    }
}

/// Per-layer MDP samples as loaded from disk or built by a simulation.
#[derive(Debug, Clone)]
pub struct MdpSamples {
    pub m: usize,
    /// layers[i] holds the climate draws for 1-based layer i+1
    pub layers: Vec<Vec<Vec<f64>>>,
}

impl MdpSamples {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self, min_per_layer: usize) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("climate dimension must be at least 1"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.len() < min_per_layer {
                return Err(Error::invalid(format!(
                    "layer {}: {} samples, need at least {min_per_layer}",
                    i + 1,
                    layer.len()
                )));
            }
            for s in layer {
                if s.len() != self.m {
                    return Err(Error::DimensionMismatch(format!(
                        "layer {}: sample of dimension {} in m={} set",
                        i + 1,
                        s.len(),
                        self.m
                    )));
                }
                if s.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid(format!("layer {}: non-finite sample", i + 1)));
                }
            }
        }
        Ok(())
    }
}

/// A full set of fitted layers, the engine's likelihood input.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSet {
    layers: Vec<LayerMdp>,
}

impl MixtureSet {
    pub fn new(layers: Vec<LayerMdp>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("mixture set has no layers"));
        }
        let m = layers[0].dim();
        for (i, l) in layers.iter().enumerate() {
            if l.layer != i + 1 {
                return Err(Error::invalid(format!(
                    "layer indices must be 1-based and contiguous; slot {} holds layer {}",
                    i, l.layer
                )));
            }
            if l.dim() != m {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} has dimension {}, expected {m}",
                    l.layer,
                    l.dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    pub fn layers(&self) -> &[LayerMdp] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &LayerMdp {
        &self.layers[i]
    }
}



#[cfg(test)]
mod proptests {
    use super::*;
    use crate::mixtures::io::parse_mixtures;
    use proptest::prelude::*;

    fn arb_layer(m: usize, g: usize) -> impl Strategy<Value = Vec<(f64, Vec<f64>, Vec<f64>)>> {
        proptest::collection::vec(
            (
                1.0e-3..1.0f64,
                proptest::collection::vec(-1.0e3..1.0e3f64, m),
                proptest::collection::vec(1.0e-6..1.0e6f64, m),
            ),
            g,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn serialization_round_trip_is_byte_identical(raw in arb_layer(3, 4)) {
            let total: f64 = raw.iter().map(|(w, _, _)| w).sum();
            let mut comps: Vec<MixtureComponent> = raw
                .iter()
                .map(|(w, mean, prec)| MixtureComponent {
                    weight: w / total,
                    mean: mean.clone(),
                    precision_diag: prec.clone(),
                })
                .collect();
            let fixup: f64 = 1.0 - comps[1..].iter().map(|c| c.weight).sum::<f64>();
            comps[0].weight = fixup;
            prop_assume!(comps[0].weight > 0.0);
            let set = MixtureSet::new(vec![LayerMdp::new(1, comps).unwrap()]).unwrap();
            let mut buf1 = Vec::new();
            write_mixtures(&mut buf1, &set, &[]).unwrap();
            let set2 = parse_mixtures(std::str::from_utf8(&buf1).unwrap()).unwrap();
            let mut buf2 = Vec::new();
            write_mixtures(&mut buf2, &set2, &[]).unwrap();
            prop_assert_eq!(buf1, buf2);
        }

        #[test]
        fn logpdf_reordering_invariance(raw in arb_layer(2, 3), x in -5.0..5.0f64, y in -5.0..5.0f64) {
            let total: f64 = raw.iter().map(|(w, _, _)| w).sum();
            let mut comps: Vec<MixtureComponent> = raw
                .iter()
                .map(|(w, mean, prec)| MixtureComponent {
                    weight: w / total,
                    mean: mean.clone(),
                    precision_diag: prec.clone(),
                })
                .collect();
            let fixup: f64 = 1.0 - comps[1..].iter().map(|c| c.weight).sum::<f64>();
            comps[0].weight = fixup;
            prop_assume!(comps[0].weight > 0.0);
            let a = LayerMdp::new(1, comps.clone()).unwrap();
            comps.reverse();
            let b = LayerMdp::new(1, comps).unwrap();
            let pa = a.logpdf(&[x, y]).unwrap();
            let pb = b.logpdf(&[x, y]).unwrap();
            prop_assert!((pa == pb) || (pa - pb).abs() < 1e-12 * pa.abs().max(1.0));
        }
    }
}
