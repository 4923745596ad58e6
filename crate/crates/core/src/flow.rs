//! Front tracking of the radial function `r(θ, t)` under `V = −H + η`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::ForcingLaw;
use crate::geometry::{area, curvature_at, polar_curvature, StarShape};
use crate::trajectory::Trajectory;

/// A prescribed forcing `η(t)`: a constant or a piecewise-linear table held
/// constant outside its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeFunction {
    Constant(f64),
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl TimeFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            TimeFunction::Constant(v) if v.is_finite() => Ok(()),
            TimeFunction::Constant(_) => Err(Error::param("eta", "must be finite")),
            TimeFunction::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::param("eta", "table needs matching non-empty times and values"));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::param("eta", "table times must increase"));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant(v) => *v,
            TimeFunction::Table { times, values } => {
                let j = times.partition_point(|&s| s <= t);
                if j == 0 {
                    values[0]
                } else if j == times.len() {
                    values[j - 1]
                } else {
                    let w = (t - times[j - 1]) / (times[j] - times[j - 1]);
                    values[j - 1] + w * (values[j] - values[j - 1])
                }
            }
        }
    }

    /// `sup |η|` over the table or the constant.
    pub fn sup_abs(&self) -> f64 {
        match self {
            TimeFunction::Constant(v) => v.abs(),
            TimeFunction::Table { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// How the forcing term of the normal velocity is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingMode {
    /// `η = λ(|Ω_t|)`.
    Normalized,
    /// `η` prescribed in time.
    Fixed { eta: TimeFunction },
    /// `V = max{−H + η, −floor}`, with `η = λ(|Ω_t|)` when no `eta` is given.
    Floored {
        floor: f64,
        #[serde(default)]
        eta: Option<TimeFunction>,
    },
}

impl ForcingMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            ForcingMode::Normalized => Ok(()),
            ForcingMode::Fixed { eta } => eta.validate(),
            ForcingMode::Floored { floor, eta } => {
                if !(*floor > 0.0 && floor.is_finite()) {
                    return Err(Error::param("floor", "velocity floor M must be positive"));
                }
                eta.as_ref().map_or(Ok(()), TimeFunction::validate)
            }
        }
    }

    /// The forcing `η` at time `t` for a set of volume `volume`.
    pub fn eta(&self, law: &ForcingLaw, volume: f64, t: f64) -> Result<f64> {
        match self {
            ForcingMode::Normalized | ForcingMode::Floored { eta: None, .. } => law.lambda(volume),
            ForcingMode::Fixed { eta } | ForcingMode::Floored { eta: Some(eta), .. } => Ok(eta.eval(t)),
        }
    }

    pub fn floor(&self) -> Option<f64> {
        match self {
            ForcingMode::Floored { floor, .. } => Some(*floor),
            _ => None,
        }
    }

    /// Applies the floor, if any, to an unrestricted speed.
    #[inline]
    pub fn clip(&self, v: f64) -> f64 {
        match self.floor() {
            Some(m) => v.max(-m),
            None => v,
        }
    }

    /// True when `η` does not depend on the evolving set.
    pub fn is_prescribed(&self) -> bool {
        matches!(
            self,
            ForcingMode::Fixed { .. } | ForcingMode::Floored { eta: Some(_), .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub forcing: ForcingMode,
    /// Fraction of the explicit stability limit used per step, in `(0, 1]`.
    #[serde(default = "default_dt_safety")]
    pub dt_safety: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Extra times that are hit exactly and always recorded.
    #[serde(default)]
    pub checkpoints: Vec<f64>,
}

fn default_dt_safety() -> f64 {
    0.4
}

fn default_stride() -> usize {
    100
}

impl FlowConfig {
    pub fn new(forcing: ForcingMode, t_end: f64) -> Self {
        Self {
            forcing,
            dt_safety: default_dt_safety(),
            t_end,
            snapshot_stride: default_stride(),
            checkpoints: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.forcing.validate()?;
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(Error::param("dt_safety", "must lie in (0, 1]"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", "must be finite and non-negative"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::param("snapshot_stride", "must be at least 1"));
        }
        if self.checkpoints.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::param("checkpoints", "must be finite and non-negative"));
        }
        Ok(())
    }

    /// Largest step allowed for `shape`. The three-point `r″` of the scheme
    /// keeps forward Euler stable for `dt ≤ (Δθ·r_min)²/2`; `dt_safety = 1`
    /// sits exactly at that limit.
    pub fn max_dt(&self, shape: &StarShape) -> f64 {
        let r_min = shape.radii().iter().cloned().fold(f64::INFINITY, f64::min);
        0.5 * self.dt_safety * (shape.dtheta() * r_min).powi(2)
    }
}

/// Normal velocity at sample `k` at time `t`.
pub fn normal_velocity(
    shape: &StarShape,
    k: usize,
    law: &ForcingLaw,
    mode: &ForcingMode,
    t: f64,
) -> Result<f64> {
    let eta = mode.eta(law, area(shape), t)?;
    Ok(mode.clip(-curvature_at(shape, k) + eta))
}

/// One forward-Euler step of `r_t = V·√(r² + r′²)/r` with `η` frozen at the
/// start of the step.
pub fn step(shape: &StarShape, dt: f64, t: f64, config: &FlowConfig, law: &ForcingLaw) -> Result<StarShape> {
    let bound = config.max_dt(shape);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, bound });
    }
    let eta = config.forcing.eta(law, area(shape), t)?;
    let n = shape.n_theta();
    let mut radii = Vec::with_capacity(n);
    for k in 0..n {
        let r = shape.radii()[k];
        let d1 = shape.dr(k);
        let d2 = shape.d2r_compact(k);
        let v = config.forcing.clip(-polar_curvature(r, d1, d2) + eta);
        let next = r + dt * v * r.hypot(d1) / r;
        if !(next > 0.0) || !next.is_finite() {
            return Err(Error::BlowDown { t: t + dt });
        }
        radii.push(next);
    }
    shape.with_radii(radii)
}

/// Runs [`step`] from `t = 0` to `config.t_end`, recording every
/// `snapshot_stride` steps, at each checkpoint and at the end. A failure
/// mid-run ends the trajectory early with the reason attached.
pub fn evolve(shape0: &StarShape, config: &FlowConfig, law: &ForcingLaw) -> Result<Trajectory> {
    config.validate()?;
    let mut traj = Trajectory::new();
    traj.record(0, 0.0, shape0.clone(), law)?;
    let mut stops: Vec<f64> = config
        .checkpoints
        .iter()
        .cloned()
        .filter(|&c| c > 0.0 && c < config.t_end)
        .collect();
    stops.push(config.t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut shape = shape0.clone();
    let mut t = 0.0;
    let mut k = 0;
    for &stop in &stops {
        while t < stop {
            let mut dt = config.max_dt(&shape);
            let landing = t + dt >= stop * (1.0 - 1e-14);
            if landing {
                dt = (stop - t).min(dt);
            }
            match step(&shape, dt, t, config, law) {
                Ok(next) => shape = next,
                Err(e) => {
                    traj.terminate(format!("{e}"));
                    return Ok(traj);
                }
            }
            t = if landing { stop } else { t + dt };
            k += 1;
            if landing || k % config.snapshot_stride == 0 {
                if let Err(e) = traj.record(k, t, shape.clone(), law) {
                    traj.terminate(format!("{e}"));
                    return Ok(traj);
                }
            }
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// Step cap as a fraction of the diffusive time `R0²/(n−1)`.
    pub dt_cap_factor: f64,
    /// Per-step error tolerance relative to `R`.
    pub tol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            dt_cap_factor: 1e-4,
            tol: 1e-13,
        }
    }
}

/// Radius of a ball evolving by `R′ = −(n−1)/R + η` (clipped below at `−M`
/// in floored mode), reported at each of `times`.
pub fn circle_ode_oracle(
    r0: f64,
    law: &ForcingLaw,
    mode: &ForcingMode,
    times: &[f64],
) -> Result<Vec<f64>> {
    circle_ode_oracle_with(r0, law, mode, times, OdeOptions::default())
}

pub fn circle_ode_oracle_with(
    r0: f64,
    law: &ForcingLaw,
    mode: &ForcingMode,
    times: &[f64],
    opts: OdeOptions,
) -> Result<Vec<f64>> {
    if !(r0 > 0.0) {
        return Err(Error::param("r0", "must be positive"));
    }
    mode.validate()?;
    let n1 = law.n() as f64 - 1.0;
    let rhs = |t: f64, r: f64| -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::BlowDown { t });
        }
        let eta = mode.eta(law, law.ball_volume(r), t)?;
        Ok(mode.clip(-n1 / r + eta))
    };
    let rk4 = |t: f64, r: f64, h: f64| -> Result<f64> {
        let k1 = rhs(t, r)?;
        let k2 = rhs(t + h / 2.0, r + h / 2.0 * k1)?;
        let k3 = rhs(t + h / 2.0, r + h / 2.0 * k2)?;
        let k4 = rhs(t + h, r + h * k3)?;
        Ok(r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    };
    let cap = opts.dt_cap_factor * r0 * r0 / n1.max(1.0);
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut r) = (0.0, r0);
    let mut h = cap;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut values = vec![0.0; times.len()];
    for &i in &order {
        let target = times[i];
        if target < 0.0 {
            return Err(Error::param("times", "must be non-negative"));
        }
        while t < target {
            let hh = h.min(cap).min(target - t);
            let full = rk4(t, r, hh)?;
            let half = rk4(t + hh / 2.0, rk4(t, r, hh / 2.0)?, hh / 2.0)?;
            let err = (full - half).abs();
            if err <= opts.tol * r.max(1e-300) || hh < 1e-14 * (1.0 + t) {
                t += hh;
                // Richardson-corrected value
                r = half + (half - full) / 15.0;
                if r < 1e-9 * r0 {
                    return Err(Error::BlowDown { t });
                }
                if err < 0.1 * opts.tol * r {
                    h = 2.0 * hh;
                } else {
                    h = hh;
                }
            } else {
                h = hh / 2.0;
            }
        }
        values[i] = r;
    }
    out.extend(values);
    Ok(out)
}
