use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use nmcf::diagnostics::{
    convergence_report, cross_validate, holder_fit, preservation_hypothesis, preservation_scan, AuditCheck,
    AuditReport, CrossValidationPlan, EngineFamily, GapTable, PreservationOptions,
};
use nmcf::engine::{run_engine, RunSettings};
use nmcf::io::{self, SnapshotEntry};
use nmcf::levelset::{write_field, FieldEncoding};
use nmcf::{Error, ForcingLaw, Trajectory};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{load_bundle, parse_json, read_text, RunConfig};
use crate::error::CliError;

/// Contents of `<out>/summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    /// The fully-resolved configuration; `run` accepts this file directly.
    pub config: RunConfig,
    pub engine: String,
    pub steps: usize,
    pub terminal_time: f64,
    pub terminal_volume: f64,
    pub terminal_energy: f64,
    /// Hausdorff distance of the terminal shape to the nearest ball of the
    /// stationary radius.
    pub terminal_residual: f64,
    pub wall_time_s: f64,
    pub termination: Option<String>,
    pub snapshots: Vec<SnapshotEntry>,
}

/// Loads a run config, or the config embedded in a previous run's summary.
fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = read_text(path)?;
    let value: serde_json::Value = parse_json(&text, path)?;
    if value.get("config").is_some() && value.get("snapshots").is_some() {
        let summary: Summary = parse_json(&text, path)?;
        summary.config.validate()?;
        return Ok(summary.config);
    }
    crate::config::load_run_config(path)
}

pub fn run(config_path: &Path, out_override: Option<PathBuf>) -> Result<Summary, CliError> {
    let mut config = load_config(config_path)?;
    if out_override.is_some() {
        config.output = out_override;
    }
    let out = config
        .output
        .clone()
        .ok_or_else(|| CliError::Config("output: required by `run`".into()))?;
    let shape0 = config.initial_shape.build()?;
    let settings = RunSettings {
        forcing: config.forcing.clone(),
        t_end: config.t_end,
        snapshot_stride: config.snapshot_stride,
        checkpoints: config.checkpoints.clone(),
    };
    let start = Instant::now();
    let result = run_engine(&config.engine, &shape0, &config.law, &settings)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    fs::create_dir_all(&out).map_err(Error::from)?;
    let traj = &result.trajectory;
    let snapshots = io::write_trajectory(&out, traj)?;
    if let Some(certs) = &result.certificates {
        io::write_csv(&out.join("certificates.csv"), certs)?;
    }
    if let Some(field) = &result.field {
        write_field(field, &out.join("field"), FieldEncoding::F64Le)?;
    }
    let last_row = traj
        .series()
        .last()
        .ok_or_else(|| CliError::Terminated("no snapshot was recorded".into()))?;
    let summary = Summary {
        engine: config.engine.name().to_string(),
        steps: traj.last().map_or(0, |s| s.step),
        terminal_time: last_row.t,
        terminal_volume: last_row.volume,
        terminal_energy: last_row.energy,
        terminal_residual: last_row.hausdorff_to_fitted_ball,
        wall_time_s,
        termination: traj.termination().map(str::to_string),
        snapshots,
        config,
    };
    io::write_json(&out.join("summary.json"), &summary)?;
    if let Some(reason) = &summary.termination {
        return Err(CliError::Terminated(format!("{} engine: {reason}", summary.engine)));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Check {
    Preservation,
    Holder,
    Convergence,
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub checks: Vec<Check>,
    pub rho: f64,
    /// Terminal residual accepted by the convergence check.
    pub residual_tol: f64,
}

pub struct AuditOutcome {
    pub report: AuditReport,
    pub refusals: Vec<String>,
}

fn load_artifacts(dir: &Path) -> Result<(Summary, Trajectory), CliError> {
    let missing: Vec<&str> = ["summary.json", "trajectory.csv", "snapshots"]
        .into_iter()
        .filter(|name| !dir.join(name).exists())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingArtifacts(format!(
            "{} lacks {}",
            dir.display(),
            missing.join(", ")
        )));
    }
    let summary_path = dir.join("summary.json");
    let summary: Summary = parse_json(&read_text(&summary_path)?, &summary_path)?;
    if let Some(e) = summary.snapshots.iter().find(|e| !dir.join(&e.file).is_file()) {
        return Err(CliError::MissingArtifacts(format!("{} lacks {}", dir.display(), e.file)));
    }
    let traj = io::read_trajectory(dir, &summary.snapshots)?;
    Ok((summary, traj))
}

fn refused(name: &str, msg: String, refusals: &mut Vec<String>) -> AuditCheck {
    refusals.push(format!("{name}: {msg}"));
    AuditCheck {
        name: name.into(),
        pass: false,
        margin: None,
        details: json!({ "refused": msg }),
    }
}

fn preservation_check(traj: &Trajectory, law: &ForcingLaw, rho: f64, refusals: &mut Vec<String>) -> Result<AuditCheck, CliError> {
    let opts = PreservationOptions::default();
    let first = &traj.snapshots()[0].shape;
    if let Err(e) = preservation_hypothesis(first, rho, law, &opts) {
        return match e {
            Error::Hypothesis(msg) => Ok(refused("preservation", msg, refusals)),
            other => Err(other.into()),
        };
    }
    let report = preservation_scan(traj, rho, law, &opts)?;
    let failing: Vec<_> = report.snapshots.iter().filter(|s| !s.pass).collect();
    Ok(AuditCheck {
        name: "preservation".into(),
        pass: report.pass,
        margin: Some(report.min_reflection_margin),
        details: json!({
            "bounds": report.bounds,
            "snapshots": report.snapshots.len(),
            "first_failure": report.first_failure,
            "passing_from": report.passing_from,
            "failing": failing,
        }),
    })
}

fn holder_check(traj: &Trajectory, refusals: &mut Vec<String>) -> Result<AuditCheck, CliError> {
    match holder_fit(traj) {
        Ok(fit) => Ok(AuditCheck {
            name: "holder".into(),
            pass: fit.pass,
            margin: Some(1.1 - fit.validation_ratio),
            details: serde_json::to_value(fit).map_err(Error::from)?,
        }),
        Err(Error::Hypothesis(msg)) => Ok(refused("holder", msg, refusals)),
        Err(e) => Err(e.into()),
    }
}

fn convergence_check(traj: &Trajectory, law: &ForcingLaw, restrict: Option<f64>, tol: f64) -> Result<AuditCheck, CliError> {
    let report = convergence_report(traj, law, restrict)?;
    let first = report.residuals.first().copied().unwrap_or(f64::NAN);
    let last = report.residuals.last().copied().unwrap_or(f64::NAN);
    // a run that starts at the ball has no decay to fit
    let rate_ok = first < tol
        || report
            .exp_rate
            .is_some_and(|f| f.rate < 0.0 && f.r_squared > 0.95);
    Ok(AuditCheck {
        name: "convergence".into(),
        pass: last < tol && rate_ok,
        margin: Some(tol - last),
        details: json!({
            "restricted_to": restrict,
            "initial_residual": first,
            "terminal_residual": last,
            "residual_tol": tol,
            "exp_rate": report.exp_rate,
            "holder": report.holder,
            "curvature_bound_after_t1": report.curvature_bound,
        }),
    })
}

/// Runs the selected checks on the artifacts in `dir` and writes
/// `<dir>/audit.json`.
pub fn audit(dir: &Path, opts: &AuditOptions) -> Result<AuditOutcome, CliError> {
    let (summary, traj) = load_artifacts(dir)?;
    if traj.is_empty() {
        return Err(CliError::MissingArtifacts(format!("{} holds no snapshots", dir.display())));
    }
    let law = summary.config.law;
    let mut checks: Vec<Check> = opts.checks.clone();
    checks.sort();
    checks.dedup();
    // the ball fit is restricted to B̄_ρ only for in-hypothesis runs
    let in_hypothesis =
        preservation_hypothesis(&traj.snapshots()[0].shape, opts.rho, &law, &PreservationOptions::default()).is_ok();
    let restrict = in_hypothesis.then_some(opts.rho);
    let mut refusals = Vec::new();
    let mut results = Vec::new();
    for check in checks {
        results.push(match check {
            Check::Preservation => preservation_check(&traj, &law, opts.rho, &mut refusals)?,
            Check::Holder => holder_check(&traj, &mut refusals)?,
            Check::Convergence => convergence_check(&traj, &law, restrict, opts.residual_tol)?,
        });
    }
    let report = AuditReport::new(results);
    io::write_json(&dir.join("audit.json"), &report)?;
    Ok(AuditOutcome { report, refusals })
}

fn same_initial_data(a: &RunConfig, b: &RunConfig) -> Result<(), String> {
    if a.law != b.law {
        return Err("law".into());
    }
    if a.initial_shape != b.initial_shape {
        return Err("initial_shape".into());
    }
    if a.forcing != b.forcing {
        return Err("forcing".into());
    }
    if a.t_end != b.t_end {
        return Err("t_end".into());
    }
    Ok(())
}

/// Runs a bundle of configs and writes `gaps.csv` and `gaps.json` under the
/// bundle's output directory.
pub fn cross(bundle_path: &Path) -> Result<GapTable, CliError> {
    let bundle = load_bundle(bundle_path)?;
    if bundle.runs.len() < 2 {
        return Err(CliError::Config("runs: at least two run configs are needed".into()));
    }
    let reference = &bundle.runs[0];
    for (field, list) in [("runs", &bundle.runs), ("m_sweep", &bundle.m_sweep)] {
        for (i, c) in list.iter().enumerate() {
            same_initial_data(reference, c).map_err(|what| {
                CliError::Config(format!("{field}[{i}].{what}: differs from runs[0]; cross-validation needs identical data"))
            })?;
        }
    }
    let mut groups: BTreeMap<&'static str, Vec<nmcf::engine::EngineSpec>> = BTreeMap::new();
    let mut order: Vec<&'static str> = Vec::new();
    for c in &bundle.runs {
        let name = c.engine.name();
        if !groups.contains_key(name) {
            order.push(name);
        }
        groups.entry(name).or_default().push(c.engine.clone());
    }
    if order.len() < 2 {
        return Err(CliError::Config("runs: at least two different engines are needed".into()));
    }
    let levels = groups[order[0]].len();
    if let Some(name) = order.iter().find(|n| groups[**n].len() != levels) {
        return Err(CliError::Config(format!(
            "runs: engine {name} has {} levels but {} has {levels}",
            groups[name].len(),
            order[0]
        )));
    }
    let plan = CrossValidationPlan {
        families: order
            .iter()
            .map(|name| EngineFamily {
                label: name.to_string(),
                levels: groups[name].clone(),
            })
            .collect(),
        m_sweep: bundle.m_sweep.iter().map(|c| c.engine.clone()).collect(),
        forcing: reference.forcing.clone(),
        t_end: reference.t_end,
    };
    let shape0 = reference.initial_shape.build()?;
    let table = cross_validate(&shape0, &reference.law, &plan)?;
    fs::create_dir_all(&bundle.output).map_err(Error::from)?;
    io::write_csv(&bundle.output.join("gaps.csv"), &table.rows())?;
    io::write_json(&bundle.output.join("gaps.json"), &table)?;
    Ok(table)
}
