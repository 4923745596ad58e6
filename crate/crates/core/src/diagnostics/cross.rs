use serde::{Deserialize, Serialize};

use crate::engine::{run_engine, EngineSpec, RunSettings};
use crate::error::{Error, Result};
use crate::flow::ForcingMode;
use crate::forcing::ForcingLaw;
use crate::geometry::{hausdorff_distance, StarShape};

/// One engine at successive refinement levels, coarsest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineFamily {
    pub label: String,
    pub levels: Vec<EngineSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationPlan {
    pub families: Vec<EngineFamily>,
    /// Minimizing-movement runs differing only in `M`; gaps are measured
    /// against the largest `M`.
    #[serde(default)]
    pub m_sweep: Vec<EngineSpec>,
    pub forcing: ForcingMode,
    pub t_end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairGaps {
    pub a: String,
    pub b: String,
    /// Terminal Hausdorff gap per level.
    pub gaps: Vec<f64>,
    /// `gap[i]/gap[i+1]`.
    pub reductions: Vec<f64>,
    /// No level exceeds its predecessor by more than 10%.
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MSweepGap {
    pub m: f64,
    pub gap_to_largest: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapTable {
    pub t_end: f64,
    pub levels: usize,
    pub pairs: Vec<PairGaps>,
    pub m_sweep: Vec<MSweepGap>,
    pub monotone: bool,
    pub min_reduction: f64,
    pub finest_max_gap: f64,
}

/// Flat row of the gap table CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub level: usize,
    pub pair: String,
    pub gap: f64,
}

impl GapTable {
    pub fn rows(&self) -> Vec<GapRow> {
        let mut rows = Vec::new();
        for p in &self.pairs {
            for (level, gap) in p.gaps.iter().enumerate() {
                rows.push(GapRow {
                    level,
                    pair: format!("{}-{}", p.a, p.b),
                    gap: *gap,
                });
            }
        }
        for m in &self.m_sweep {
            rows.push(GapRow {
                level: self.levels.saturating_sub(1),
                pair: format!("atw-M{}-vs-largest", m.m),
                gap: m.gap_to_largest,
            });
        }
        rows
    }
}

fn terminal(spec: &EngineSpec, shape0: &StarShape, law: &ForcingLaw, forcing: &ForcingMode, t_end: f64) -> Result<StarShape> {
    let run = run_engine(spec, shape0, law, &RunSettings::new(forcing.clone(), t_end))?;
    if let Some(reason) = run.trajectory.termination() {
        return Err(Error::Format(reason.to_string()).in_engine(spec.name()));
    }
    let last = run
        .trajectory
        .last()
        .ok_or_else(|| Error::Format("no snapshots".into()).in_engine(spec.name()))?;
    // the minimizing-movement clock advances in steps of h
    let slack = match spec {
        EngineSpec::Atw { h, .. } => *h,
        _ => 1e-9 * t_end.max(1.0),
    };
    if (last.t - t_end).abs() > slack {
        return Err(Error::Format(format!("stopped at t = {} instead of {t_end}", last.t)).in_engine(spec.name()));
    }
    Ok(last.shape.clone())
}

/// Gap summary for per-level terminal shapes of each family.
pub fn gap_table(labels: &[String], terminals: &[Vec<StarShape>], t_end: f64, m_sweep: Vec<MSweepGap>) -> GapTable {
    let levels = terminals.iter().map(Vec::len).min().unwrap_or(0);
    let mut pairs = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let gaps: Vec<f64> = (0..levels)
                .map(|l| hausdorff_distance(&terminals[i][l], &terminals[j][l]))
                .collect();
            let reductions: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
            let monotone = gaps.windows(2).all(|w| w[1] <= 1.1 * w[0]);
            pairs.push(PairGaps {
                a: labels[i].clone(),
                b: labels[j].clone(),
                gaps,
                reductions,
                monotone,
            });
        }
    }
    GapTable {
        t_end,
        levels,
        monotone: pairs.iter().all(|p| p.monotone),
        min_reduction: pairs
            .iter()
            .flat_map(|p| p.reductions.iter().cloned())
            .fold(f64::INFINITY, f64::min),
        finest_max_gap: pairs
            .iter()
            .filter_map(|p| p.gaps.last().cloned())
            .fold(0.0, f64::max),
        pairs,
        m_sweep,
    }
}

/// Runs every family at every level from identical data and tabulates the
/// pairwise terminal Hausdorff gaps at `t_end`.
pub fn cross_validate(shape0: &StarShape, law: &ForcingLaw, plan: &CrossValidationPlan) -> Result<GapTable> {
    if plan.families.len() < 2 && plan.m_sweep.is_empty() {
        return Err(Error::param("families", "at least two engines are needed"));
    }
    let labels: Vec<String> = plan.families.iter().map(|f| f.label.clone()).collect();
    let mut terminals = Vec::with_capacity(plan.families.len());
    for fam in &plan.families {
        let mut shapes = Vec::with_capacity(fam.levels.len());
        for spec in &fam.levels {
            shapes.push(terminal(spec, shape0, law, &plan.forcing, plan.t_end)?);
        }
        terminals.push(shapes);
    }
    let mut sweep: Vec<(f64, StarShape)> = Vec::new();
    for spec in &plan.m_sweep {
        let EngineSpec::Atw { m, .. } = spec else {
            return Err(Error::param("m_sweep", "entries must use the minimizing-movement engine"));
        };
        sweep.push((*m, terminal(spec, shape0, law, &plan.forcing, plan.t_end)?));
    }
    let m_sweep = match sweep.iter().max_by(|a, b| a.0.total_cmp(&b.0)) {
        Some((_, reference)) => sweep
            .iter()
            .map(|(m, s)| MSweepGap {
                m: *m,
                gap_to_largest: hausdorff_distance(s, reference),
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(gap_table(&labels, &terminals, plan.t_end, m_sweep))
}
