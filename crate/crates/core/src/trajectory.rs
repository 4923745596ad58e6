//! Time-indexed shape sequences with their per-snapshot series.

use serde::{Deserialize, Serialize};

use crate::diagnostics::fit_nearest_ball;
use crate::error::{Error, Result};
use crate::forcing::ForcingLaw;
use crate::geometry::{area, inner_outer_radius, perimeter, star_radius, StarShape, Vec2};

/// One row of the trajectory CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub volume: f64,
    pub perimeter: f64,
    pub energy: f64,
    pub lambda: f64,
    /// Star radius about the origin; `NaN` when the origin is outside.
    pub star_radius: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub hausdorff_to_fitted_ball: f64,
}

impl SeriesRow {
    pub fn measure(shape: &StarShape, t: f64, law: &ForcingLaw) -> Result<Self> {
        let volume = area(shape);
        let per = perimeter(shape);
        let (inner, outer) = inner_outer_radius(shape, Vec2::zeros());
        Ok(Self {
            t,
            volume,
            perimeter: per,
            energy: per - law.antiderivative(volume)?,
            lambda: law.lambda(volume)?,
            star_radius: star_radius(shape, Vec2::zeros()).unwrap_or(f64::NAN),
            inner_radius: inner,
            outer_radius: outer,
            hausdorff_to_fitted_ball: fit_nearest_ball(shape, law, None).residual,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub shape: StarShape,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    snapshots: Vec<Snapshot>,
    series: Vec<SeriesRow>,
    termination: Option<String>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles a trajectory from stored parts, checking that the times are
    /// strictly increasing and agree with the series.
    pub fn from_parts(snapshots: Vec<Snapshot>, series: Vec<SeriesRow>) -> Result<Self> {
        if snapshots.len() != series.len() {
            return Err(Error::Format(format!(
                "{} snapshots but {} series rows",
                snapshots.len(),
                series.len()
            )));
        }
        for (s, row) in snapshots.iter().zip(&series) {
            if (s.t - row.t).abs() > 1e-12 * (1.0 + s.t.abs()) {
                return Err(Error::Format(format!(
                    "snapshot time {} does not match series time {}",
                    s.t, row.t
                )));
            }
        }
        if snapshots.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::Format("snapshot times are not strictly increasing".into()));
        }
        Ok(Self {
            snapshots,
            series,
            termination: None,
        })
    }

    /// Measures `shape` and appends it. Times must strictly increase.
    pub fn record(&mut self, step: usize, t: f64, shape: StarShape, law: &ForcingLaw) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if t <= last.t {
                return Err(Error::param("t", format!("{t} does not follow {}", last.t)));
            }
        }
        let row = SeriesRow::measure(&shape, t, law)?;
        self.snapshots.push(Snapshot { step, t, shape });
        self.series.push(row);
        Ok(())
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn series(&self) -> &[SeriesRow] {
        &self.series
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn shapes(&self) -> impl Iterator<Item = &StarShape> {
        self.snapshots.iter().map(|s| &s.shape)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    /// Snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    /// Why the run stopped before its end time, if it did.
    pub fn termination(&self) -> Option<&str> {
        self.termination.as_deref()
    }

    pub fn is_complete(&self) -> bool {
        self.termination.is_none()
    }

    pub fn terminate(&mut self, reason: impl Into<String>) {
        self.termination = Some(reason.into());
    }
}
