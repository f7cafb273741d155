//! Phase 1: per-layer parameter fitting.
//!
//! For every layer-target the integer length is fixed from the data range
//! first. The fractional length is then `min(bw - 1 - il, cap)` where the
//! cap is searched over the FL range; each candidate is scored by the L2
//! distance at the layer's activation point with only that target
//! quantized, and ties go to the larger FL. K-means tables run the same
//! search over the FL of their shared-value table. Standard fixed point
//! shares one (bw, il, fl) triple across the network and is scored on the
//! final layer with every layer-target quantized.

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_activations, analyze_weights, DistributionStats};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::pipeline::compare::Evaluator;
use crate::pipeline::sweep::{FlRange, SweepSpec, DEFAULT_SIGMA_MULT, DEFAULT_TABLE_BW};
use crate::quant::kmeans::{kmeans_range, table_params};
use crate::quant::{fit_fl, il_for_max_abs, FixedParams, KMeansTable, NetworkQuantConfig, QuantScheme, SchemeKind, Target};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub fl_range: FlRange,
    pub sigma_mult: f64,
    pub table_bw: u8,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fl_range: FlRange::default(),
            sigma_mult: DEFAULT_SIGMA_MULT,
            table_bw: DEFAULT_TABLE_BW,
        }
    }
}

impl From<&SweepSpec> for FitOptions {
    fn from(spec: &SweepSpec) -> Self {
        Self {
            fl_range: spec.fl_search_range,
            sigma_mult: spec.sigma_mult,
            table_bw: spec.table_bw,
        }
    }
}

/// A fitted scheme for one (technique, bit width, layer, target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FittedScheme {
    pub technique: SchemeKind,
    pub bw: u8,
    pub layer_id: String,
    pub target: Target,
    pub scheme: QuantScheme,
    /// Distance achieved during fitting.
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FittedSchemes(pub Vec<FittedScheme>);

impl FittedSchemes {
    pub fn get(&self, technique: SchemeKind, bw: u8, layer: &str, target: Target) -> Option<&FittedScheme> {
        self.0.iter().find(|f| {
            f.technique == technique && f.bw == bw && f.target == target && f.layer_id == layer
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &FittedScheme> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Distinct effective FLs over every cap in `range`, ascending.
pub fn fl_candidates(bw: u8, il: i32, range: FlRange) -> Vec<i32> {
    let mut fls: Vec<i32> = range.caps().map(|cap| fit_fl(bw, il, cap)).collect();
    fls.dedup();
    fls
}

fn stats_for<'s>(stats: &'s [DistributionStats], layer: &str, target: Target) -> Result<&'s DistributionStats> {
    stats
        .iter()
        .find(|s| s.layer_id == layer && s.target == target)
        .ok_or_else(|| Error::InvalidArgument(format!("no {target} statistics for layer `{layer}`")))
}

/// Layer-targets eligible for quantization: weights of weighted layers and
/// activations of every layer, in layer order.
pub fn layer_targets(net: &Network) -> Vec<(usize, Target)> {
    net.layers()
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            let w = l.is_weighted().then_some((i, Target::Weights));
            w.into_iter().chain(std::iter::once((i, Target::Activations)))
        })
        .collect()
}

/// Evaluates candidates in descending-FL order and keeps the first minimum.
fn search<F>(mut fls: Vec<i32>, mut eval: F) -> Result<(QuantScheme, f64)>
where
    F: FnMut(i32) -> Result<(QuantScheme, f64)>,
{
    fls.sort_unstable_by(|a, b| b.cmp(a));
    let mut best: Option<(QuantScheme, f64)> = None;
    for fl in fls {
        let (scheme, d) = eval(fl)?;
        if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
            best = Some((scheme, d));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty FL grid".into()))
}

/// Builds the scheme of `technique` at `bw` for one group with a given FL.
pub fn scheme_with_fl(
    technique: SchemeKind,
    bw: u8,
    stats: &DistributionStats,
    fl: i32,
    opts: &FitOptions,
) -> Result<QuantScheme> {
    match technique {
        SchemeKind::DynamicFixed | SchemeKind::StandardFixed => {
            let p = FixedParams::new(bw, il_for_max_abs(stats.max_abs() as f32), fl)?;
            Ok(if technique == SchemeKind::DynamicFixed {
                QuantScheme::DynamicFixed(p)
            } else {
                QuantScheme::StandardFixed(p)
            })
        }
        SchemeKind::KmeansLinear | SchemeKind::KmeansGaussian => {
            let dist = technique.range_kind().expect("k-means kind");
            let (lo, hi) = kmeans_range(stats, dist, opts.sigma_mult);
            let table = table_params(lo, hi, opts.table_bw, fl)?;
            Ok(QuantScheme::Kmeans(KMeansTable::from_range(lo, hi, bw, dist, table)?))
        }
    }
}

/// FL grid for one group under `technique`.
pub fn group_candidates(technique: SchemeKind, bw: u8, stats: &DistributionStats, opts: &FitOptions) -> Vec<i32> {
    if technique.is_kmeans() {
        let (lo, hi) = kmeans_range(stats, technique.range_kind().expect("k-means"), opts.sigma_mult);
        let il = il_for_max_abs(lo.abs().max(hi.abs()) as f32);
        fl_candidates(opts.table_bw, il, opts.fl_range)
    } else {
        fl_candidates(bw, il_for_max_abs(stats.max_abs() as f32), opts.fl_range)
    }
}

/// Fits one layer-target with everything else left in float.
pub fn fit_one(
    eval: &Evaluator<'_>,
    stats: &DistributionStats,
    technique: SchemeKind,
    bw: u8,
    opts: &FitOptions,
) -> Result<FittedScheme> {
    let net = eval.network();
    let idx = net.index_of(&stats.layer_id)?;
    let point = net.activation_point(idx);
    let (scheme, distance) = search(group_candidates(technique, bw, stats, opts), |fl| {
        let scheme = scheme_with_fl(technique, bw, stats, fl, opts)?;
        let cfg = NetworkQuantConfig::new("fit").with(&stats.layer_id, stats.target, scheme.clone());
        Ok((scheme, eval.distance_at(&cfg, point)?))
    })?;
    Ok(FittedScheme {
        technique,
        bw,
        layer_id: stats.layer_id.clone(),
        target: stats.target,
        scheme,
        distance,
    })
}

/// One shared fixed-point format for every layer-target of the network.
pub fn fit_standard(
    eval: &Evaluator<'_>,
    stats: &[DistributionStats],
    bw: u8,
    opts: &FitOptions,
) -> Result<(FixedParams, f64)> {
    let net = eval.network();
    let targets = layer_targets(net);
    let il = targets
        .iter()
        .map(|&(i, t)| stats_for(stats, &net.layers()[i].id, t).map(|s| s.max_abs()))
        .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
        .map(|m| il_for_max_abs(m as f32))?;
    let (scheme, d) = search(fl_candidates(bw, il, opts.fl_range), |fl| {
        let scheme = QuantScheme::StandardFixed(FixedParams::new(bw, il, fl)?);
        let mut cfg = NetworkQuantConfig::new("fit");
        for &(i, t) in &targets {
            cfg.set(&net.layers()[i].id, t, scheme.clone());
        }
        let d = if net.is_empty() {
            0.0
        } else {
            eval.distance_at(&cfg, net.len() - 1)?
        };
        Ok((scheme, d))
    })?;
    Ok((scheme.fixed_params().expect("fixed"), d))
}

/// Fits `technique` at `bw` for every eligible layer-target.
pub fn fit_layer_params(
    eval: &Evaluator<'_>,
    stats: &[DistributionStats],
    technique: SchemeKind,
    bw: u8,
    opts: &FitOptions,
) -> Result<Vec<FittedScheme>> {
    let net = eval.network();
    let targets = layer_targets(net);
    if technique == SchemeKind::StandardFixed {
        let (params, distance) = fit_standard(eval, stats, bw, opts)?;
        return Ok(targets
            .iter()
            .map(|&(i, target)| FittedScheme {
                technique,
                bw,
                layer_id: net.layers()[i].id.clone(),
                target,
                scheme: QuantScheme::StandardFixed(params),
                distance,
            })
            .collect());
    }
    targets
        .iter()
        .map(|&(i, t)| fit_one(eval, stats_for(stats, &net.layers()[i].id, t)?, technique, bw, opts))
        .collect()
}

/// Everything Phase 1 produces.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerAnalysis {
    pub stats: Vec<DistributionStats>,
    pub fitted: FittedSchemes,
}

/// Collects statistics and fits every technique × bit width.
///
/// The suggested IL/FL in the statistics are computed for the widest
/// requested bit width with the FL range's upper bound as cap.
pub fn run_layer_analysis(
    net: &Network,
    calib: &[Tensor],
    techniques: &[SchemeKind],
    bit_widths: &[u8],
    opts: &FitOptions,
) -> Result<LayerAnalysis> {
    opts.fl_range.validate()?;
    let stats_bw = bit_widths.iter().copied().max().unwrap_or(32).max(2);
    let mut stats = analyze_weights(net, stats_bw, opts.fl_range.hi);
    stats.extend(analyze_activations(net, calib, stats_bw, opts.fl_range.hi)?);
    let eval = Evaluator::new(net, calib)?;
    let mut fitted = Vec::new();
    for &technique in techniques {
        for &bw in bit_widths {
            fitted.extend(fit_layer_params(&eval, &stats, technique, bw, opts)?);
        }
    }
    Ok(LayerAnalysis {
        stats,
        fitted: FittedSchemes(fitted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Layer, LayerKind};

    fn fc(weights: Vec<f32>) -> Network {
        let n = weights.len();
        let kind = LayerKind::FullyConnected {
            in_features: n,
            out_features: 1,
        };
        let layer = Layer::new(
            "fc",
            kind,
            vec![Tensor::new(vec![1, n], weights).unwrap(), Tensor::vector(vec![0.0])],
        );
        Network::new(vec![n], vec![layer]).unwrap()
    }

    fn calib(n: usize) -> Vec<Tensor> {
        (0..4)
            .map(|s| Tensor::from_fn(vec![n], |i| ((i * 7 + s * 3) % 11) as f32 * 0.1 - 0.5))
            .collect()
    }

    #[test]
    fn candidates_clamp_to_bit_budget() {
        assert_eq!(fl_candidates(16, 3, FlRange::default()), (8..=12).collect::<Vec<_>>());
        assert_eq!(fl_candidates(8, 3, FlRange::default()), vec![4]);
        assert_eq!(fl_candidates(32, 0, FlRange::default()), (8..=20).collect::<Vec<_>>());
        assert_eq!(fl_candidates(4, 7, FlRange::default()), vec![0]);
    }

    #[test]
    fn exactly_representable_weights_fit_at_their_grid() {
        // multiples of 2^-10 with |w| < 1 are exact at FL = 10 and above
        let w: Vec<f32> = (0..8).map(|i| (i as f32 * 37.0 - 100.0) / 1024.0).collect();
        let net = fc(w);
        let batch = calib(8);
        let eval = Evaluator::new(&net, &batch).unwrap();
        let stats = analyze_weights(&net, 12, 20);
        let f = fit_one(&eval, &stats[0], SchemeKind::DynamicFixed, 12, &FitOptions::default()).unwrap();
        // max |w| = 159/1024 so il = -2 and bw 12 allows FL up to 13; every FL >= 10
        // is exact and ties go to the largest
        assert_eq!(f.distance, 0.0);
        let p = f.scheme.fixed_params().unwrap();
        assert_eq!(p.il, -2);
        assert_eq!(p.fl, 13);

        // capped at 10 the search lands exactly on the grid
        let opts = FitOptions {
            fl_range: FlRange::new(8, 10).unwrap(),
            ..FitOptions::default()
        };
        let f = fit_one(&eval, &stats[0], SchemeKind::DynamicFixed, 16, &opts).unwrap();
        assert_eq!((f.scheme.fixed_params().unwrap().fl, f.distance), (10, 0.0));
    }

    #[test]
    fn all_zero_weights_prefer_largest_fl() {
        let net = fc(vec![0.0; 4]);
        let batch = calib(4);
        let eval = Evaluator::new(&net, &batch).unwrap();
        let stats = analyze_weights(&net, 32, 20);
        let f = fit_one(&eval, &stats[0], SchemeKind::DynamicFixed, 32, &FitOptions::default()).unwrap();
        assert_eq!(f.distance, 0.0);
        assert_eq!(f.scheme.fixed_params().unwrap().fl, 20);
    }

    #[test]
    fn il_fixed_before_search() {
        let net = fc(vec![6.0, -1.0, 0.5, 2.0]);
        let batch = calib(4);
        let eval = Evaluator::new(&net, &batch).unwrap();
        let stats = analyze_weights(&net, 16, 20);
        let f = fit_one(&eval, &stats[0], SchemeKind::DynamicFixed, 16, &FitOptions::default()).unwrap();
        let p = f.scheme.fixed_params().unwrap();
        assert_eq!(p.il, 3);
        assert!(p.fl <= 12);
    }

    #[test]
    fn standard_fixed_shares_one_format() {
        let net = fc(vec![0.25, -0.5, 0.75, 0.1]);
        let batch = calib(4);
        let analysis = run_layer_analysis(&net, &batch, &[SchemeKind::StandardFixed], &[8], &FitOptions::default()).unwrap();
        let schemes: Vec<_> = analysis.fitted.iter().map(|f| f.scheme.clone()).collect();
        assert_eq!(schemes.len(), 2);
        assert_eq!(schemes[0], schemes[1]);
    }
}
