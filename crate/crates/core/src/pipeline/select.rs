use std::cmp::Ordering;

use crate::pipeline::explore::{ExplorationReport, ReportRow};
use crate::quant::NetworkQuantConfig;

/// Selection criterion over an exploration report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// Maximize combined saving with `final_distance <= bound`.
    MaxDistance(f64),
    /// Minimize final distance with combined saving `>= floor` percent.
    MinSaving(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Feasible { row: usize, config: NetworkQuantConfig },
    Infeasible,
}

impl Selection {
    pub fn config(&self) -> Option<&NetworkQuantConfig> {
        match self {
            Selection::Feasible { config, .. } => Some(config),
            Selection::Infeasible => None,
        }
    }
}

fn tie_break(a: &ReportRow, b: &ReportRow) -> Ordering {
    a.label
        .cmp(&b.label)
        .then(a.bw.cmp(&b.bw))
        .then(a.index.cmp(&b.index))
}

/// Picks the best configuration under `constraint`.
///
/// Ties on the objective go to the other metric, then lexicographic label
/// (layer ids), then smaller bit width.
pub fn select_best(report: &ExplorationReport, constraint: Constraint) -> Selection {
    let best = match constraint {
        Constraint::MaxDistance(bound) => report
            .rows
            .iter()
            .filter(|r| r.result.final_distance <= bound)
            .min_by(|a, b| {
                b.result
                    .combined_saving_pct
                    .total_cmp(&a.result.combined_saving_pct)
                    .then(a.result.final_distance.total_cmp(&b.result.final_distance))
                    .then_with(|| tie_break(a, b))
            }),
        Constraint::MinSaving(floor) => report
            .rows
            .iter()
            .filter(|r| r.result.combined_saving_pct >= floor)
            .min_by(|a, b| {
                a.result
                    .final_distance
                    .total_cmp(&b.result.final_distance)
                    .then(b.result.combined_saving_pct.total_cmp(&a.result.combined_saving_pct))
                    .then_with(|| tie_break(a, b))
            }),
    };
    match best {
        Some(row) => {
            let mut config = row.config.clone();
            config.provenance = format!("select:row{}:{}", row.index, row.config.provenance);
            Selection::Feasible {
                row: row.index,
                config,
            }
        }
        None => Selection::Infeasible,
    }
}
