//! Run configuration: parsing, presets and resolution of the initial shape.
//!
//! Units: lengths (`radius`, `base`, `dx`, `half_width`, `r0`) are in the
//! same length unit as the shape radii, `t_end` and `h` in time units, `M`
//! in length per time, and `B` in length^(n·β − 1) per time so that
//! `λ(s) = B/s^β` is a speed.

use std::fs;
use std::path::{Path, PathBuf};

use nmcf::atw::OptimizerOptions;
use nmcf::engine::EngineSpec;
use nmcf::flow::ForcingMode;
use nmcf::{io, ForcingLaw, StarShape, Vec2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Initial data of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeSpec {
    Disk {
        radius: f64,
        n_theta: usize,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `r(θ) = base·(1 + amplitude·cos(mode·θ))` about the origin.
    #[serde(alias = "cos3-perturbation")]
    CosinePerturbation {
        base: f64,
        amplitude: f64,
        #[serde(default = "default_mode")]
        mode: u32,
        n_theta: usize,
    },
    /// Radii on the uniform angular grid starting at `θ = 0`.
    Radii {
        radii: Vec<f64>,
        #[serde(default)]
        center: [f64; 2],
    },
    /// A snapshot JSON file; relative paths are resolved against the config
    /// file's directory.
    File { path: PathBuf },
}

fn default_mode() -> u32 {
    3
}

fn default_forcing() -> ForcingMode {
    ForcingMode::Normalized
}

impl ShapeSpec {
    pub fn build(&self) -> Result<StarShape, CliError> {
        let shape = match self {
            ShapeSpec::Disk {
                radius,
                n_theta,
                center,
            } => StarShape::disk(Vec2::new(center[0], center[1]), *radius, *n_theta),
            ShapeSpec::CosinePerturbation {
                base,
                amplitude,
                mode,
                n_theta,
            } => StarShape::cosine_perturbation(*base, *amplitude, *mode, *n_theta),
            ShapeSpec::Radii { radii, center } => StarShape::new(Vec2::new(center[0], center[1]), radii.clone()),
            ShapeSpec::File { path } => {
                if !path.is_file() {
                    return Err(CliError::Config(format!(
                        "initial_shape.path: {} does not exist",
                        path.display()
                    )));
                }
                io::read_shape(path)
            }
        };
        shape.map_err(|e| CliError::Config(format!("initial_shape: {e}")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let ShapeSpec::File { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `{"B": …, "beta": …, "n": …}`.
    pub law: ForcingLaw,
    pub initial_shape: ShapeSpec,
    /// Engine kind with its resolution parameters.
    pub engine: EngineSpec,
    #[serde(default = "default_forcing")]
    pub forcing: ForcingMode,
    pub t_end: f64,
    /// Steps between recorded snapshots; omitted keeps the engine default.
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
    /// Times that are hit exactly and always recorded.
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    /// Artifact directory; relative paths are resolved against the config
    /// file's directory. Required by `run`, ignored inside bundles.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Recorded for reproducibility. All engines are deterministic, so the
    /// seed does not change any output.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(CliError::Config("t_end: must be positive and finite".into()));
        }
        if self.snapshot_stride == Some(0) {
            return Err(CliError::Config("snapshot_stride: must be at least 1".into()));
        }
        if self.checkpoints.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(CliError::Config("checkpoints: must be finite and non-negative".into()));
        }
        self.forcing
            .validate()
            .map_err(|e| CliError::Config(format!("forcing: {e}")))?;
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        self.initial_shape.resolve_paths(base);
        if let Some(out) = &self.output {
            if out.is_relative() {
                self.output = Some(base.join(out));
            }
        }
    }
}

/// Named scenarios shared by the CLI and the acceptance suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// The stationary disk of radius `1/π` under the flow engine to `t = 5`.
    StationaryDisk,
    /// `r = 0.318(1 + 0.05 cos 3θ)` by 500 minimizing-movement steps to `t = 3`.
    Cos3Decay,
}

impl Preset {
    pub fn config(self) -> RunConfig {
        let law = ForcingLaw::new(1.0, 1.0, 2).expect("unit law");
        match self {
            Preset::StationaryDisk => RunConfig {
                law,
                initial_shape: ShapeSpec::Disk {
                    radius: std::f64::consts::FRAC_1_PI,
                    n_theta: 256,
                    center: [0.0, 0.0],
                },
                engine: EngineSpec::Flow {
                    dt_safety: 0.4,
                    n_theta: None,
                },
                forcing: ForcingMode::Normalized,
                t_end: 5.0,
                snapshot_stride: Some(10_000),
                checkpoints: Vec::new(),
                output: None,
                seed: 0,
            },
            Preset::Cos3Decay => RunConfig {
                law,
                initial_shape: ShapeSpec::CosinePerturbation {
                    base: 0.318,
                    amplitude: 0.05,
                    mode: 3,
                    n_theta: 256,
                },
                engine: EngineSpec::Atw {
                    h: 6e-3,
                    m: 10.0,
                    r0: 0.1,
                    n_theta: None,
                    optimizer: OptimizerOptions::default(),
                },
                forcing: ForcingMode::Normalized,
                t_end: 3.0,
                snapshot_stride: Some(1),
                checkpoints: Vec::new(),
                output: None,
                seed: 0,
            },
        }
    }
}

/// `{"preset": …, "output": …}` stands for the preset's full configuration.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetRequest {
    preset: Preset,
    #[serde(default)]
    output: Option<PathBuf>,
}

/// Deserializes `text`, reporting the JSON path of the offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str, source: &Path) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = if path == "." { String::new() } else { format!("{path}: ") };
        CliError::Config(format!("{}: {at}{inner}", source.display()))
    })
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parses a run config from `text`, expanding presets and resolving
/// relative paths against `base`.
pub fn parse_run_config(text: &str, source: &Path, base: &Path) -> Result<RunConfig, CliError> {
    let value: serde_json::Value = parse_json(text, source)?;
    let mut config = if value.get("preset").is_some() {
        let req: PresetRequest = parse_json(text, source)?;
        let mut c = req.preset.config();
        c.output = req.output;
        c
    } else {
        parse_json::<RunConfig>(text, source)?
    };
    config.resolve_paths(base);
    config.validate()?;
    Ok(config)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    parse_run_config(&read_text(path)?, path, &base_dir(path))
}

/// An inline run config or the path of one.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum BundleEntry {
    Path(PathBuf),
    Inline(serde_json::Value),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bundle {
    /// Runs grouped by engine, each group ordered coarsest first.
    pub runs: Vec<BundleEntry>,
    /// Minimizing-movement runs differing only in `M`.
    #[serde(default)]
    pub m_sweep: Vec<BundleEntry>,
    /// Directory receiving `gaps.csv` and `gaps.json`.
    pub output: PathBuf,
}

pub struct LoadedBundle {
    pub runs: Vec<RunConfig>,
    pub m_sweep: Vec<RunConfig>,
    pub output: PathBuf,
}

pub fn load_bundle(path: &Path) -> Result<LoadedBundle, CliError> {
    let base = base_dir(path);
    let bundle: Bundle = parse_json(&read_text(path)?, path)?;
    let load = |list: &[BundleEntry], field: &str| -> Result<Vec<RunConfig>, CliError> {
        list.iter()
            .enumerate()
            .map(|(i, entry)| match entry {
                BundleEntry::Path(p) => load_run_config(&base.join(p)),
                BundleEntry::Inline(v) => {
                    let label = PathBuf::from(format!("{}: {field}[{i}]", path.display()));
                    parse_run_config(&v.to_string(), &label, &base)
                }
            })
            .collect()
    };
    let output = if bundle.output.is_relative() {
        base.join(&bundle.output)
    } else {
        bundle.output.clone()
    };
    Ok(LoadedBundle {
        runs: load(&bundle.runs, "runs")?,
        m_sweep: load(&bundle.m_sweep, "m_sweep")?,
        output,
    })
}
