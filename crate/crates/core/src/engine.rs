//! Uniform entry point to the three evolution engines.

use serde::{Deserialize, Serialize};

use crate::atw::{discrete_flow, AtwConfig, OptimizerOptions, StepCertificate};
use crate::error::{Error, Result};
use crate::flow::{evolve, FlowConfig, ForcingMode};
use crate::forcing::ForcingLaw;
use crate::geometry::{inner_outer_radius, StarShape};
use crate::levelset::{evolve_grid_with_field, GridSpec, LevelSetConfig, LevelSetField};
use crate::trajectory::Trajectory;

/// Engine choice with its resolution parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EngineSpec {
    Flow {
        #[serde(default = "flow_dt_safety")]
        dt_safety: f64,
        /// Resample the initial shape to this many angles.
        #[serde(default)]
        n_theta: Option<usize>,
    },
    Levelset {
        dx: f64,
        /// Defaults to `1.25·max(reach, R*) + 8Δx`.
        #[serde(default)]
        half_width: Option<f64>,
        #[serde(default = "ls_dt_safety")]
        dt_safety: f64,
        #[serde(default = "ls_reinit")]
        reinit_every: usize,
        #[serde(default)]
        n_theta: Option<usize>,
    },
    Atw {
        h: f64,
        #[serde(rename = "M")]
        m: f64,
        r0: f64,
        #[serde(default)]
        n_theta: Option<usize>,
        #[serde(default)]
        optimizer: OptimizerOptions,
    },
}

fn flow_dt_safety() -> f64 {
    0.4
}

fn ls_dt_safety() -> f64 {
    1.0
}

fn ls_reinit() -> usize {
    50
}

impl EngineSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EngineSpec::Flow { .. } => "flow",
            EngineSpec::Levelset { .. } => "levelset",
            EngineSpec::Atw { .. } => "atw",
        }
    }

    fn n_theta(&self) -> Option<usize> {
        match self {
            EngineSpec::Flow { n_theta, .. }
            | EngineSpec::Levelset { n_theta, .. }
            | EngineSpec::Atw { n_theta, .. } => *n_theta,
        }
    }

    /// The level-set grid used for `shape0`.
    pub fn grid_for(&self, shape0: &StarShape, law: &ForcingLaw) -> Option<GridSpec> {
        match self {
            EngineSpec::Levelset { dx, half_width, .. } => Some(match half_width {
                Some(w) => GridSpec::new(*dx, *w),
                None => {
                    let reach = GridSpec::around(shape0, *dx, 0.0).half_width;
                    GridSpec::new(*dx, 1.25 * reach.max(law.stationary_radius()) + 8.0 * dx)
                }
            }),
            _ => None,
        }
    }
}

/// What a run shares across engines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub forcing: ForcingMode,
    pub t_end: f64,
    /// Steps between recorded snapshots; `None` keeps each engine's default.
    pub snapshot_stride: Option<usize>,
    pub checkpoints: Vec<f64>,
}

impl RunSettings {
    pub fn new(forcing: ForcingMode, t_end: f64) -> Self {
        Self {
            forcing,
            t_end,
            snapshot_stride: None,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineRun {
    pub trajectory: Trajectory,
    /// Per-step certificates (atw only).
    pub certificates: Option<Vec<StepCertificate>>,
    /// Terminal field (levelset only).
    pub field: Option<LevelSetField>,
}

/// Runs `spec` from `shape0`; engine errors carry the engine name.
pub fn run_engine(spec: &EngineSpec, shape0: &StarShape, law: &ForcingLaw, settings: &RunSettings) -> Result<EngineRun> {
    run_inner(spec, shape0, law, settings).map_err(|e| e.in_engine(spec.name()))
}

fn run_inner(spec: &EngineSpec, shape0: &StarShape, law: &ForcingLaw, settings: &RunSettings) -> Result<EngineRun> {
    let shape = match spec.n_theta() {
        Some(n) if n != shape0.n_theta() => shape0.recentered(shape0.center(), n)?,
        _ => shape0.clone(),
    };
    match spec {
        EngineSpec::Flow { dt_safety, .. } => {
            let mut config = FlowConfig::new(settings.forcing.clone(), settings.t_end);
            config.dt_safety = *dt_safety;
            config.checkpoints = settings.checkpoints.clone();
            if let Some(s) = settings.snapshot_stride {
                config.snapshot_stride = s;
            }
            Ok(EngineRun {
                trajectory: evolve(&shape, &config, law)?,
                certificates: None,
                field: None,
            })
        }
        EngineSpec::Levelset {
            dt_safety,
            reinit_every,
            ..
        } => {
            let grid = spec.grid_for(&shape, law).expect("levelset grid");
            let mut config = LevelSetConfig::new(settings.forcing.clone(), settings.t_end);
            config.dt_safety = *dt_safety;
            config.reinit_every = *reinit_every;
            config.checkpoints = settings.checkpoints.clone();
            if let Some(s) = settings.snapshot_stride {
                config.snapshot_stride = s;
            }
            let (trajectory, field) = evolve_grid_with_field(&shape, &grid, &config, law)?;
            Ok(EngineRun {
                trajectory,
                certificates: None,
                field: Some(field),
            })
        }
        EngineSpec::Atw {
            h,
            m,
            r0,
            optimizer,
            ..
        } => {
            if settings.forcing != ForcingMode::Normalized {
                return Err(Error::param(
                    "forcing",
                    "the minimizing-movement engine supports only the normalized forcing",
                ));
            }
            let mut config = AtwConfig::new(*h, *m, *r0);
            config.optimizer = optimizer.clone();
            if let Some(s) = settings.snapshot_stride {
                config.snapshot_stride = s;
            }
            let run = discrete_flow(&shape, &config, law, settings.t_end)?;
            Ok(EngineRun {
                trajectory: run.trajectory,
                certificates: Some(run.certificates),
                field: None,
            })
        }
    }
}

/// A conservative `r₀` for the minimizing-movement engine: half the inner
/// radius of `shape0` about its center.
pub fn default_r0(shape0: &StarShape) -> f64 {
    0.5 * inner_outer_radius(shape0, shape0.center()).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    #[test]
    fn engines_agree_on_a_disk() {
        let law = ForcingLaw::new(1.0, 1.0, 2).unwrap();
        let d = StarShape::disk(Vec2::zeros(), 0.5, 64).unwrap();
        let settings = RunSettings::new(ForcingMode::Normalized, 0.05);
        let specs = [
            EngineSpec::Flow {
                dt_safety: 0.4,
                n_theta: None,
            },
            EngineSpec::Levelset {
                dx: 1.0 / 32.0,
                half_width: None,
                dt_safety: 1.0,
                reinit_every: 50,
                n_theta: None,
            },
            EngineSpec::Atw {
                h: 5e-3,
                m: 4.0,
                r0: 0.2,
                n_theta: None,
                optimizer: OptimizerOptions::default(),
            },
        ];
        let finals: Vec<f64> = specs
            .iter()
            .map(|s| {
                let run = run_engine(s, &d, &law, &settings).unwrap();
                let last = run.trajectory.last().unwrap();
                assert!((last.t - 0.05).abs() < 1e-12, "{}", s.name());
                last.shape.radii().iter().sum::<f64>() / last.shape.n_theta() as f64
            })
            .collect();
        for r in &finals {
            assert!((r - finals[0]).abs() < 2.0 / 32.0, "{finals:?}");
        }
    }

    #[test]
    fn atw_rejects_prescribed_forcing() {
        let law = ForcingLaw::new(1.0, 1.0, 2).unwrap();
        let d = StarShape::disk(Vec2::zeros(), 0.5, 32).unwrap();
        let spec = EngineSpec::Atw {
            h: 1e-2,
            m: 1.0,
            r0: 0.1,
            n_theta: None,
            optimizer: OptimizerOptions::default(),
        };
        let settings = RunSettings::new(
            ForcingMode::Fixed {
                eta: crate::flow::TimeFunction::Constant(1.0),
            },
            0.1,
        );
        let err = run_engine(&spec, &d, &law, &settings).unwrap_err();
        assert!(err.to_string().starts_with("atw engine failed"), "{err}");
    }

    #[test]
    fn spec_json_is_tagged_by_kind() {
        let s: EngineSpec = serde_json::from_str(r#"{"kind": "atw", "h": 0.01, "M": 2, "r0": 0.1}"#).unwrap();
        assert!(matches!(s, EngineSpec::Atw { m, .. } if m == 2.0));
        assert!(serde_json::from_str::<EngineSpec>(r#"{"kind": "flow", "dt": 0.1}"#).is_err());
    }
}
