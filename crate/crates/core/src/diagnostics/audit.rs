use serde::{Deserialize, Serialize};

use super::fit::{exp_rate_fit_series, fit_nearest_ball, holder_fit, HolderFit, RateFit, RESIDUAL_NOISE_FLOOR};
use super::curvature_bound;
use crate::engine::{run_engine, EngineSpec, RunSettings};
use crate::error::{Error, Result};
use crate::flow::{ForcingMode, TimeFunction};
use crate::forcing::ForcingLaw;
use crate::geometry::{
    annulus_and_derived_radius, diameter, inner_outer_radius, GeometryReport, HalfSpace, ReflectionOptions,
    StarShape, Vec2, DENSE_FACTOR,
};
use crate::geometry::rho_reflection_check;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub times: Vec<f64>,
    pub fitted_centers: Vec<Vec2>,
    /// Residual to the fitted ball of the stationary radius, per snapshot.
    pub residuals: Vec<f64>,
    pub exp_rate: Option<RateFit>,
    pub holder: Option<HolderFit>,
    /// Largest `|κ|` over snapshots with `t ≥ 1`, when any exist.
    pub curvature_bound: Option<f64>,
}

/// Fits the stationary ball to every snapshot (center restricted to `B̄_ρ(0)`
/// when `restrict` is given) and summarizes the decay.
pub fn convergence_report(traj: &Trajectory, law: &ForcingLaw, restrict: Option<f64>) -> Result<ConvergenceReport> {
    let fits: Vec<_> = traj.shapes().map(|s| fit_nearest_ball(s, law, restrict)).collect();
    let times = traj.times();
    let residuals: Vec<f64> = fits.iter().map(|f| f.residual).collect();
    Ok(ConvergenceReport {
        exp_rate: exp_rate_fit_series(&times, &residuals, RESIDUAL_NOISE_FLOOR).ok(),
        holder: holder_fit(traj).ok(),
        curvature_bound: curvature_bound(traj, 1.0),
        fitted_centers: fits.iter().map(|f| f.center).collect(),
        residuals,
        times,
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PreservationOptions {
    pub reflection: ReflectionOptions,
    /// Slack for the radius checks; `None` uses the reflection tolerance.
    pub tolerance: Option<f64>,
}

/// Time-independent bounds the audit holds every snapshot to.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PreservationBounds {
    pub rho: f64,
    /// `outer − inner ≤ 4ρ`.
    pub annulus_limit: f64,
    /// `B_{(1+a)ρ}` stays inside; `NaN` if the hypothesis behind it fails.
    pub inner_radius: f64,
    /// The set stays inside `B_R`; `NaN` if no barrier exists.
    pub outer_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotAudit {
    pub step: usize,
    pub t: f64,
    pub geometry: GeometryReport,
    /// `(inf|x|² − ρ²)^{1/2}`, or `NaN` when `inf|x| ≤ ρ`.
    pub derived_star_radius: f64,
    pub tolerance: f64,
    pub reflection_ok: bool,
    pub annulus_ok: bool,
    pub star_ok: bool,
    pub inner_ok: bool,
    pub outer_ok: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreservationReport {
    pub bounds: PreservationBounds,
    pub snapshots: Vec<SnapshotAudit>,
    pub pass: bool,
    /// Time of the first failing snapshot.
    pub first_failure: Option<f64>,
    /// Earliest time from which every later snapshot passes.
    pub passing_from: Option<f64>,
    pub min_reflection_margin: f64,
}

/// Refuses unless `shape0` satisfies ρ-reflection and the forcing law meets
/// the hypotheses of the preservation theorem at `ρ`.
pub fn preservation_hypothesis(shape0: &StarShape, rho: f64, law: &ForcingLaw, opts: &PreservationOptions) -> Result<()> {
    let a = law.check_assumption_a(rho)?;
    if !a.pass {
        return Err(Error::Hypothesis(format!(
            "forcing law fails the confinement assumption at ρ = {rho} (ρ_max = {:.6})",
            a.rho_max
        )));
    }
    let v = rho_reflection_check(shape0, rho, &opts.reflection)?;
    if !v.pass {
        return Err(Error::Hypothesis(format!(
            "initial set fails ρ-reflection at ρ = {rho}: margin {:.3e}, tolerance {:.3e}, ball clearance {:.3e}",
            v.margin, v.tolerance, v.ball_clearance
        )));
    }
    Ok(())
}

/// Per-snapshot preservation checks without the initial hypothesis test.
pub fn preservation_scan(traj: &Trajectory, rho: f64, law: &ForcingLaw, opts: &PreservationOptions) -> Result<PreservationReport> {
    let first = traj
        .snapshots()
        .first()
        .ok_or_else(|| Error::Format("empty trajectory".into()))?;
    let (inner0, outer0) = inner_outer_radius(&first.shape, Vec2::zeros());
    let bounds = PreservationBounds {
        rho,
        annulus_limit: 4.0 * rho,
        inner_radius: law.inner_confinement_radius(rho, inner0).unwrap_or(f64::NAN),
        outer_radius: law.outer_confinement_radius(rho, outer0).unwrap_or(f64::NAN),
    };
    let mut snapshots = Vec::with_capacity(traj.len());
    for snap in traj.snapshots() {
        let geometry = GeometryReport::compute(&snap.shape, rho, &opts.reflection)?;
        let tol = opts.tolerance.unwrap_or(geometry.rho_reflection.tolerance);
        let derived = annulus_and_derived_radius(&snap.shape, rho)
            .map(|a| a.derived_star_radius)
            .unwrap_or(f64::NAN);
        let reflection_ok = geometry.rho_reflection.pass;
        let annulus_ok = geometry.annulus_width <= bounds.annulus_limit + tol;
        let star_ok = geometry.star_radius >= derived - tol;
        let inner_ok = geometry.inner_radius >= bounds.inner_radius - tol;
        let outer_ok = geometry.outer_radius <= bounds.outer_radius + tol;
        snapshots.push(SnapshotAudit {
            step: snap.step,
            t: snap.t,
            pass: reflection_ok && annulus_ok && star_ok && inner_ok && outer_ok,
            geometry,
            derived_star_radius: derived,
            tolerance: tol,
            reflection_ok,
            annulus_ok,
            star_ok,
            inner_ok,
            outer_ok,
        });
    }
    let first_failure = snapshots.iter().find(|s| !s.pass).map(|s| s.t);
    let passing_from = match snapshots.iter().rposition(|s| !s.pass) {
        None => snapshots.first().map(|s| s.t),
        Some(i) => snapshots.get(i + 1).map(|s| s.t),
    };
    let min_reflection_margin = snapshots
        .iter()
        .map(|s| s.geometry.rho_reflection.margin)
        .fold(f64::INFINITY, f64::min);
    Ok(PreservationReport {
        bounds,
        pass: first_failure.is_none(),
        snapshots,
        first_failure,
        passing_from,
        min_reflection_margin,
    })
}

/// Checks ρ-reflection, the `4ρ` annulus, the derived star radius and inner
/// and outer confinement on every snapshot. Refuses with
/// [`Error::Hypothesis`] when the first snapshot is outside the hypotheses.
pub fn preservation_audit(traj: &Trajectory, rho: f64, law: &ForcingLaw, opts: &PreservationOptions) -> Result<PreservationReport> {
    let first = traj
        .snapshots()
        .first()
        .ok_or_else(|| Error::Format("empty trajectory".into()))?;
    preservation_hypothesis(&first.shape, rho, law, opts)?;
    preservation_scan(traj, rho, law, opts)
}

/// Smallest clearance of the reflected cap `φ_H(∂Ω ∩ H₊)` inside `Ω`: the raw
/// radial margin, and the margin divided by the reflection distance
/// `2(x·ν − s)`, which stays positive up to the plane for strict inclusions.
pub fn reflected_cap_margin(shape: &StarShape, plane: &HalfSpace) -> (f64, f64) {
    let pts = shape.dense_boundary(DENSE_FACTOR);
    let floor = 1e-6 * diameter(shape);
    let mut raw = f64::INFINITY;
    let mut scaled = f64::INFINITY;
    for x in &pts {
        let d = plane.signed(*x);
        if d <= floor {
            continue;
        }
        let m = shape.radial_margin(plane.reflect(*x));
        raw = raw.min(m);
        scaled = scaled.min(m / (2.0 * d));
    }
    (raw, scaled)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlaneOutcome {
    pub plane: HalfSpace,
    pub initial_scaled_margin: f64,
    /// `(t, raw margin, scaled margin)` per snapshot.
    pub margins: Vec<(f64, f64, f64)>,
    pub min_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarnessReport {
    pub engine: String,
    pub tolerance: f64,
    pub planes: Vec<PlaneOutcome>,
    pub pass: bool,
}

/// Evolves `shape0` once with prescribed `η` and checks, for every plane and
/// snapshot, that the reflected cap stays inside within `tolerance` (default:
/// `Δx` for the grid engine, `1e-3·diameter` otherwise). Every plane must
/// hold the inclusion strictly at `t = 0`.
pub fn reflection_comparison_harness(
    shape0: &StarShape,
    planes: &[HalfSpace],
    eta: TimeFunction,
    engine: &EngineSpec,
    law: &ForcingLaw,
    t_end: f64,
    tolerance: Option<f64>,
) -> Result<HarnessReport> {
    if planes.is_empty() {
        return Err(Error::param("planes", "at least one plane is needed"));
    }
    for plane in planes {
        let (raw, scaled) = reflected_cap_margin(shape0, plane);
        if !(scaled > 0.0 && raw.is_finite()) {
            return Err(Error::Hypothesis(format!(
                "reflection across ν = ({:.4}, {:.4}), s = {} is not strictly inside at t = 0 (scaled margin {scaled:.3e})",
                plane.normal().x,
                plane.normal().y,
                plane.offset()
            )));
        }
    }
    let tolerance = tolerance.unwrap_or(match engine {
        EngineSpec::Levelset { dx, .. } => *dx,
        _ => 1e-3 * diameter(shape0),
    });
    let settings = RunSettings::new(ForcingMode::Fixed { eta }, t_end);
    let run = run_engine(engine, shape0, law, &settings)?;
    if let Some(reason) = run.trajectory.termination() {
        return Err(Error::Engine {
            engine: engine.name(),
            source: Box::new(Error::Format(reason.to_string())),
        });
    }
    let outcomes: Vec<PlaneOutcome> = planes
        .iter()
        .map(|plane| {
            let margins: Vec<(f64, f64, f64)> = run
                .trajectory
                .snapshots()
                .iter()
                .map(|s| {
                    let (raw, scaled) = reflected_cap_margin(&s.shape, plane);
                    (s.t, raw, scaled)
                })
                .collect();
            let min_margin = margins
                .iter()
                .map(|m| if m.1.is_finite() { m.1 } else { 0.0 })
                .fold(f64::INFINITY, f64::min);
            PlaneOutcome {
                plane: *plane,
                initial_scaled_margin: margins[0].2,
                pass: min_margin >= -tolerance,
                margins,
                min_margin,
            }
        })
        .collect();
    Ok(HarnessReport {
        engine: engine.name().to_string(),
        tolerance,
        pass: outcomes.iter().all(|o| o.pass),
        planes: outcomes,
    })
}

/// One entry of an audit report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub pass: bool,
    /// Signed distance to the pass threshold where one exists; positive passes.
    pub margin: Option<f64>,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub pass: bool,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn new(checks: Vec<AuditCheck>) -> Self {
        Self {
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::ForcingLaw;
    use crate::trajectory::Trajectory;
    use std::f64::consts::PI;

    fn law() -> ForcingLaw {
        ForcingLaw::new(1.0, 1.0, 2).unwrap()
    }

    fn coarse() -> PreservationOptions {
        PreservationOptions {
            reflection: ReflectionOptions {
                n_directions: 32,
                n_offsets: 16,
                ..Default::default()
            },
            tolerance: None,
        }
    }

    fn still(shapes: Vec<StarShape>) -> Trajectory {
        let mut traj = Trajectory::new();
        for (k, s) in shapes.into_iter().enumerate() {
            traj.record(k, 0.1 * k as f64, s, &law()).unwrap();
        }
        traj
    }

    #[test]
    fn ball_run_passes() {
        let d = StarShape::disk(Vec2::zeros(), 1.0 / PI, 128).unwrap();
        let traj = still(vec![d.clone(), d.clone(), d]);
        let rep = preservation_audit(&traj, 0.01, &law(), &coarse()).unwrap();
        assert!(rep.pass, "{:?}", rep.snapshots[0]);
        assert_eq!(rep.passing_from, Some(0.0));
        assert!(rep.bounds.inner_radius > 0.01 && rep.bounds.outer_radius > 1.0 / PI);
    }

    #[test]
    fn translated_snapshot_is_caught() {
        let d = StarShape::disk(Vec2::zeros(), 1.0 / PI, 128).unwrap();
        let moved = d.translated(Vec2::new(0.05, 0.0));
        let traj = still(vec![d.clone(), moved, d]);
        let rep = preservation_audit(&traj, 0.01, &law(), &coarse()).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.first_failure, Some(0.1));
        assert_eq!(rep.passing_from, Some(0.2));
    }

    #[test]
    fn out_of_hypothesis_start_is_refused() {
        let s = StarShape::cosine_perturbation(1.0 / PI, 0.05, 3, 128).unwrap();
        let traj = still(vec![s]);
        assert!(matches!(
            preservation_audit(&traj, 0.01, &law(), &coarse()),
            Err(Error::Hypothesis(_))
        ));
        // the scan still reports
        assert!(!preservation_scan(&traj, 0.01, &law(), &coarse()).unwrap().pass);
    }

    #[test]
    fn ball_cap_margin_is_offset_over_radius() {
        let d = StarShape::disk(Vec2::zeros(), 1.0, 512).unwrap();
        let plane = HalfSpace::from_angle(0.3, 0.4);
        let (raw, scaled) = reflected_cap_margin(&d, &plane);
        assert!(raw >= -1e-9);
        assert!((scaled - 0.4).abs() < 1e-2, "{scaled}");
    }

    #[test]
    fn harness_on_a_centered_ball() {
        let d = StarShape::disk(Vec2::zeros(), 0.4, 64).unwrap();
        let planes = [HalfSpace::from_angle(0.0, 0.1), HalfSpace::from_angle(2.0, 0.2)];
        let engine = EngineSpec::Flow {
            dt_safety: 0.4,
            n_theta: None,
        };
        let rep = reflection_comparison_harness(&d, &planes, TimeFunction::Constant(1.0), &engine, &law(), 0.05, None)
            .unwrap();
        assert!(rep.pass);
        for p in &rep.planes {
            assert!(p.margins.iter().all(|m| m.2 > 0.0));
        }
        // a plane through the far side of an off-center shape violates the start
        let off = d.translated(Vec2::new(0.1, 0.0));
        let bad = [HalfSpace::from_angle(0.0, 0.02)];
        assert!(matches!(
            reflection_comparison_harness(&off, &bad, TimeFunction::Constant(1.0), &engine, &law(), 0.05, None),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn convergence_report_of_a_still_ball() {
        let d = StarShape::disk(Vec2::new(0.005, 0.0), 1.0 / PI, 128).unwrap();
        let traj = still(vec![d.clone(); 3]);
        let rep = convergence_report(&traj, &law(), Some(0.01)).unwrap();
        assert!(rep.residuals.iter().all(|r| *r < 1e-6));
        assert!((rep.fitted_centers[0] - Vec2::new(0.005, 0.0)).norm() < 1e-3);
    }
}
