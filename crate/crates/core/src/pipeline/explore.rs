//! Phase 2: network space exploration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::compare::{ComparisonResult, Evaluator};
use crate::pipeline::fit::FittedSchemes;
use crate::pipeline::sweep::{SweepMode, SweepSpec, Targets};
use crate::quant::{NetworkQuantConfig, SchemeKind};

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRow {
    /// Position in enumeration order.
    pub index: usize,
    pub mode: SweepMode,
    /// Layer id, or the group's ids joined with `+`, or `network`.
    pub label: String,
    pub technique: SchemeKind,
    pub bw: u8,
    pub targets: Targets,
    /// Per-target fitted parameters (`IL/FL` or `K`).
    pub params: String,
    pub result: ComparisonResult,
    pub config: NetworkQuantConfig,
}

impl ReportRow {
    /// Saving of a single value at this width over 32 bits, before any table overhead.
    pub fn value_saving_pct(&self) -> f64 {
        (1.0 - self.bw as f64 / 32.0) * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestForBitWidth {
    pub bw: u8,
    pub row: usize,
    pub final_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationReport {
    pub spec: SweepSpec,
    pub rows: Vec<ReportRow>,
    /// Lowest final distance per bit width, in the sweep's bit-width order.
    pub best_per_bw: Vec<BestForBitWidth>,
}

impl ExplorationReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(bw, final_distance)` pairs in row order.
    pub fn curve(&self) -> Vec<(u8, f64)> {
        self.rows
            .iter()
            .map(|r| (r.bw, r.result.final_distance))
            .collect()
    }
}

/// A configuration to evaluate, before running it.
#[derive(Debug, Clone)]
struct Planned {
    label: String,
    technique: SchemeKind,
    bw: u8,
    params: String,
    config: NetworkQuantConfig,
}

fn units(eval: &Evaluator<'_>, spec: &SweepSpec) -> Result<Vec<(String, Vec<String>)>> {
    let net = eval.network();
    for id in &spec.layers {
        net.index_of(id)?;
    }
    let listed = || -> Vec<String> {
        if spec.layers.is_empty() {
            net.layers().iter().map(|l| l.id.clone()).collect()
        } else {
            spec.layers.clone()
        }
    };
    Ok(match spec.mode {
        SweepMode::SingleLayer => listed().into_iter().map(|id| (id.clone(), vec![id])).collect(),
        SweepMode::LayerGroup => {
            let group = listed();
            vec![(group.join("+"), group)]
        }
        SweepMode::WholeNetwork => vec![(
            "network".to_string(),
            net.layers().iter().map(|l| l.id.clone()).collect(),
        )],
    })
}

fn plan(eval: &Evaluator<'_>, fitted: &FittedSchemes, spec: &SweepSpec) -> Result<Vec<Planned>> {
    let net = eval.network();
    let units = units(eval, spec)?;
    let mut planned = Vec::new();
    for &technique in &spec.techniques {
        for (label, layers) in &units {
            for &bw in &spec.bit_widths {
                let mut config = NetworkQuantConfig::new(format!(
                    "explore:{}:{label}:{technique}:{bw}",
                    spec.mode.as_str()
                ));
                let mut params = Vec::new();
                for id in layers {
                    let layer = net.layer(id)?;
                    for &target in spec.targets.list() {
                        if target == crate::quant::Target::Weights && !layer.is_weighted() {
                            continue;
                        }
                        let f = fitted.get(technique, bw, id, target).ok_or_else(|| {
                            Error::Unfitted {
                                layer: id.clone(),
                                target: format!("{target} ({technique}, {bw} bits)"),
                            }
                        })?;
                        params.push(format!("{id}.{}:{}", &target.as_str()[..1], f.scheme.summary()));
                        config.set(id, target, f.scheme.clone());
                    }
                }
                if config.is_empty() {
                    continue;
                }
                planned.push(Planned {
                    label: label.clone(),
                    technique,
                    bw,
                    params: params.join(" "),
                    config,
                });
            }
        }
    }
    Ok(planned)
}

/// Enumerates the configurations of `spec`, compares each against the float
/// baseline, and records them in enumeration order.
pub fn explore(eval: &Evaluator<'_>, fitted: &FittedSchemes, spec: &SweepSpec) -> Result<ExplorationReport> {
    spec.validate()?;
    let planned = plan(eval, fitted, spec)?;
    let results: Vec<ComparisonResult> = planned
        .par_iter()
        .map(|p| eval.compare(&p.config))
        .collect::<Result<_>>()?;
    let rows: Vec<ReportRow> = planned
        .into_iter()
        .zip(results)
        .enumerate()
        .map(|(index, (p, result))| ReportRow {
            index,
            mode: spec.mode,
            label: p.label,
            technique: p.technique,
            bw: p.bw,
            targets: spec.targets,
            params: p.params,
            result,
            config: p.config,
        })
        .collect();
    let best_per_bw = spec
        .bit_widths
        .iter()
        .filter_map(|&bw| {
            rows.iter()
                .filter(|r| r.bw == bw)
                .fold(None::<&ReportRow>, |best, r| match best {
                    Some(b) if b.result.final_distance <= r.result.final_distance => Some(b),
                    _ => Some(r),
                })
                .map(|r| BestForBitWidth {
                    bw,
                    row: r.index,
                    final_distance: r.result.final_distance,
                })
        })
        .collect();
    Ok(ExplorationReport {
        spec: spec.clone(),
        rows,
        best_per_bw,
    })
}
