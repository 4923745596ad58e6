//! Trajectory audits: convergence to the stationary ball, exponential rate,
//! Hölder continuity in time, preservation of ρ-reflection and confinement,
//! reflection comparison and cross-engine coincidence.

mod audit;
mod cross;
mod fit;

pub use audit::{
    convergence_report, preservation_audit, preservation_hypothesis, preservation_scan, reflected_cap_margin,
    reflection_comparison_harness, AuditCheck, AuditReport, ConvergenceReport, HarnessReport, PlaneOutcome,
    PreservationBounds, PreservationOptions, PreservationReport, SnapshotAudit,
};
pub use cross::{cross_validate, gap_table, CrossValidationPlan, EngineFamily, GapRow, GapTable, MSweepGap, PairGaps};
pub use fit::{
    centroid, curvature_bound, exp_rate_fit, exp_rate_fit_series, fit_nearest_ball, holder_fit,
    normal_deviation_report, BallFit, HolderFit, NormalDeviation, RateFit, HOLDER_MIN_SNAPSHOTS,
    RESIDUAL_NOISE_FLOOR,
};
