use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::ForcingLaw;
use crate::geometry::{
    area, curvature_at, hausdorff_distance, outward_normal_at, radial_distance, StarShape, Vec2,
    DENSE_FACTOR,
};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallFit {
    pub center: Vec2,
    pub radius: f64,
    /// `sup_{x∈∂Ω} ||x − center| − radius|`, the boundary Hausdorff distance
    /// to the ball for sets star-shaped about `center`.
    pub residual: f64,
}

/// Area centroid of a polar graph.
pub fn centroid(shape: &StarShape) -> Vec2 {
    let h = shape.dtheta();
    let mut m = Vec2::zeros();
    for (k, r) in shape.radii().iter().enumerate() {
        let t = shape.angle(k);
        m += r.powi(3) * Vec2::new(t.cos(), t.sin());
    }
    shape.center() + m * h / (3.0 * area(shape))
}

/// Fits a ball of the stationary radius `R*` by pattern search over its
/// center, starting from the area centroid. With `restrict = Some(ρ)` the
/// center stays in `B̄_ρ(0)`.
pub fn fit_nearest_ball(shape: &StarShape, law: &ForcingLaw, restrict: Option<f64>) -> BallFit {
    let radius = law.stationary_radius();
    let pts = shape.dense_boundary(DENSE_FACTOR);
    let residual = |c: Vec2| {
        pts.iter()
            .map(|p| ((p - c).norm() - radius).abs())
            .fold(0.0, f64::max)
    };
    let project = |c: Vec2| match restrict {
        Some(rho) if c.norm() > rho => c * (rho / c.norm()),
        _ => c,
    };
    let mut c = project(centroid(shape));
    let mut best = residual(c);
    let dirs: Vec<Vec2> = (0..8)
        .map(|j| {
            let a = std::f64::consts::FRAC_PI_4 * j as f64;
            Vec2::new(a.cos(), a.sin())
        })
        .collect();
    let mut step = 0.05 * radius;
    while step > 1e-12 * radius {
        let mut moved = false;
        for d in &dirs {
            let cand = project(c + step * d);
            let v = residual(cand);
            if v < best {
                best = v;
                c = cand;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    BallFit {
        center: c,
        radius,
        residual: best,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Slope of `ln(residual)` against `t`; negative means decay.
    pub rate: f64,
    pub r_squared: f64,
    pub n_used: usize,
    /// Samples at or below this value carry no signal and are dropped.
    pub noise_floor: f64,
    pub decaying: bool,
    pub monotone_tail: bool,
    /// Last retained value is below 10% of the first.
    pub tail_small: bool,
}

/// Least-squares fit of `ln y = a + rate·t` on the last half of the samples
/// that lie above the noise floor.
pub fn exp_rate_fit_series(times: &[f64], values: &[f64], noise_floor: f64) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::param("values", "length differs from times"));
    }
    let kept: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > noise_floor && v.is_finite())
        .map(|(t, v)| (*t, *v))
        .collect();
    if kept.len() < 4 {
        return Err(Error::Hypothesis(format!(
            "only {} samples above the noise floor {noise_floor:e}",
            kept.len()
        )));
    }
    let tail = &kept[kept.len() / 2..];
    let n = tail.len() as f64;
    let (mt, my) = tail
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, v)| (a + t / n, b + v.ln() / n));
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, v) in tail {
        let (dt, dy) = (t - mt, v.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::Hypothesis("tail samples share one time".into()));
    }
    let rate = sty / stt;
    let ss_res = (syy - rate * sty).max(0.0);
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        rate,
        r_squared,
        n_used: tail.len(),
        noise_floor,
        decaying: rate < -1e-9,
        monotone_tail: tail.windows(2).all(|w| w[1].1 <= w[0].1),
        tail_small: kept.last().unwrap().1 < 0.1 * kept[0].1,
    })
}

/// Default noise floor for residual series.
pub const RESIDUAL_NOISE_FLOOR: f64 = 1e-10;

/// Exponential rate of the residual-to-fitted-ball column of a trajectory.
pub fn exp_rate_fit(traj: &Trajectory) -> Result<RateFit> {
    let t: Vec<f64> = traj.series().iter().map(|r| r.t).collect();
    let y: Vec<f64> = traj.series().iter().map(|r| r.hausdorff_to_fitted_ball).collect();
    exp_rate_fit_series(&t, &y, RESIDUAL_NOISE_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// `max d_H(Ω_t, Ω_s)/|t − s|^{1/2}` over pairs in the first half.
    pub c: f64,
    /// The same quotient over second-half pairs, divided by `c`.
    pub validation_ratio: f64,
    pub pass: bool,
    pub pairs: usize,
}

pub const HOLDER_MIN_SNAPSHOTS: usize = 20;

/// Fits the ½-Hölder constant on the first half of the run and validates it
/// on the second half.
pub fn holder_fit(traj: &Trajectory) -> Result<HolderFit> {
    let snaps = traj.snapshots();
    if snaps.len() < HOLDER_MIN_SNAPSHOTS {
        return Err(Error::Hypothesis(format!(
            "{} snapshots, at least {HOLDER_MIN_SNAPSHOTS} needed",
            snaps.len()
        )));
    }
    let mid = 0.5 * (snaps[0].t + snaps[snaps.len() - 1].t);
    let split = snaps.partition_point(|s| s.t <= mid);
    let dist = |a: &StarShape, b: &StarShape| radial_distance(a, b).unwrap_or_else(|| hausdorff_distance(a, b));
    let quotient_max = |part: &[crate::trajectory::Snapshot]| {
        let mut q: f64 = 0.0;
        for i in 0..part.len() {
            for j in i + 1..part.len() {
                let gap = (part[j].t - part[i].t).sqrt();
                q = q.max(dist(&part[i].shape, &part[j].shape) / gap);
            }
        }
        q
    };
    let (first, second) = snaps.split_at(split);
    let c = quotient_max(first);
    let q2 = quotient_max(second);
    let validation_ratio = if c > 0.0 {
        q2 / c
    } else if q2 <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    let n1 = first.len();
    let n2 = second.len();
    Ok(HolderFit {
        c,
        validation_ratio,
        pass: validation_ratio <= 1.1,
        pairs: n1 * (n1.max(1) - 1) / 2 + n2 * (n2.max(1) - 1) / 2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalDeviation {
    /// `max_x |ν_x − (x − c)/|x − c||`.
    pub max_deviation: f64,
    /// α-Hölder seminorm of the deviation field `x ↦ ν_x − (x − c)/|x − c|`,
    /// which vanishes on balls centered at `c`.
    pub holder_seminorm: f64,
    pub alpha: f64,
}

pub fn normal_deviation_report(shape: &StarShape, center: Vec2, alpha: f64) -> Result<NormalDeviation> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1)"));
    }
    let n = shape.n_theta();
    let pts = shape.boundary_points();
    let dev: Vec<Vec2> = (0..n)
        .map(|k| {
            let d = pts[k] - center;
            outward_normal_at(shape, k) - d / d.norm()
        })
        .collect();
    let max_deviation = dev.iter().map(|d| d.norm()).fold(0.0, f64::max);
    let mut holder_seminorm: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let gap = (pts[i] - pts[j]).norm();
            if gap > 0.0 {
                holder_seminorm = holder_seminorm.max((dev[i] - dev[j]).norm() / gap.powf(alpha));
            }
        }
    }
    Ok(NormalDeviation {
        max_deviation,
        holder_seminorm,
        alpha,
    })
}

/// Largest `|κ|` over snapshots with `t ≥ t_from`: a bounded-curvature proxy
/// for uniform `C^{1,1}` regularity.
pub fn curvature_bound(traj: &Trajectory, t_from: f64) -> Option<f64> {
    traj.snapshots()
        .iter()
        .filter(|s| s.t >= t_from)
        .map(|s| {
            (0..s.shape.n_theta())
                .map(|k| curvature_at(&s.shape, k).abs())
                .fold(0.0, f64::max)
        })
        .reduce(f64::max)
}
