//! Restricted minimizing movements: each step minimizes
//! `I_h(F; E) = J(F) + d̃²(F, E)/h` over star-shaped `F` with
//! `star_radius(F) ≥ r₀` and `d_H(∂(F ∩ E), ∂E) ≤ M·h`.
//!
//! The decision variable is the radii vector of `F` on the grid of `E`. The
//! constraints enter as quadratic penalties whose weight doubles until they
//! hold to tolerance; a final projection restores exact admissibility, and a
//! candidate that does not beat `I_h(E; E) = J(E)` is discarded.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::ForcingLaw;
use crate::geometry::{
    area, boundary_hausdorff_distance, polar_pseudo_distance_sq, star_radius, StarShape,
    MID_STENCIL, SLOPE_STENCIL, STAGGERED_SLOPE_STENCIL,
};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOptions {
    #[serde(default = "d_newton")]
    pub max_newton: usize,
    /// Stop when `‖∇I‖_∞` falls below this.
    #[serde(default = "d_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "d_penalty_start")]
    pub penalty_start: f64,
    #[serde(default = "d_penalty_rounds")]
    pub penalty_rounds: usize,
    /// Constraint violation accepted before projection, as a fraction of
    /// `min(M·h, r₀)`.
    #[serde(default = "d_feasibility")]
    pub feasibility_tol: f64,
}

fn d_newton() -> usize {
    60
}
fn d_grad_tol() -> f64 {
    1e-13
}
fn d_penalty_start() -> f64 {
    1e4
}
fn d_penalty_rounds() -> usize {
    40
}
fn d_feasibility() -> f64 {
    1e-2
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_newton: d_newton(),
            grad_tol: d_grad_tol(),
            penalty_start: d_penalty_start(),
            penalty_rounds: d_penalty_rounds(),
            feasibility_tol: d_feasibility(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtwConfig {
    pub h: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub r0: f64,
    #[serde(default = "d_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
}

fn d_stride() -> usize {
    1
}

impl AtwConfig {
    pub fn new(h: f64, m: f64, r0: f64) -> Self {
        Self {
            h,
            m,
            r0,
            snapshot_stride: 1,
            optimizer: OptimizerOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h", self.h), ("M", self.m), ("r0", self.r0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if self.snapshot_stride == 0 {
            return Err(Error::param("snapshot_stride", "must be at least 1"));
        }
        let o = &self.optimizer;
        if o.max_newton == 0 || !(o.grad_tol > 0.0) || !(o.penalty_start > 0.0) || !(o.feasibility_tol > 0.0) {
            return Err(Error::param("optimizer", "iteration cap and tolerances must be positive"));
        }
        Ok(())
    }

    /// The step bound `M·h`.
    pub fn step_bound(&self) -> f64 {
        self.m * self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCertificate {
    pub k: usize,
    /// `J_after` is `J_before` plus the energy change evaluated in
    /// difference form, so `Ih_decrease` is exact to the size of the step.
    #[serde(rename = "J_before")]
    pub j_before: f64,
    #[serde(rename = "J_after")]
    pub j_after: f64,
    pub d_tilde: f64,
    /// `J_before − (J_after + d̃²/h)`.
    #[serde(rename = "Ih_decrease")]
    pub ih_decrease: f64,
    pub star_margin: f64,
    pub hausdorff_margin: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// `star_radius(F) − r₀`.
    pub star_margin: f64,
    /// `M·h − d_H(∂(F ∩ E), ∂E)`.
    pub hausdorff_margin: f64,
}

impl Admissibility {
    pub fn admissible(&self) -> bool {
        self.star_margin >= 0.0 && self.hausdorff_margin >= 0.0
    }
}

/// Margins of `F` in the admissible class of `E`. Both shapes must share a
/// center and an angular grid.
pub fn admissibility_check(f: &StarShape, e: &StarShape, config: &AtwConfig) -> Result<Admissibility> {
    if f.center() != e.center() || f.n_theta() != e.n_theta() {
        return Err(Error::param("F", "must share the center and angular grid of E"));
    }
    let star_margin = star_radius(f, f.center()).map_or(f64::NEG_INFINITY, |s| s - config.r0);
    let meet = e.with_radii(f.radii().iter().zip(e.radii()).map(|(a, b)| a.min(*b)).collect())?;
    Ok(Admissibility {
        star_margin,
        hausdorff_margin: config.step_bound() - boundary_hausdorff_distance(&meet, e),
    })
}

/// Applies a periodic stencil at every index.
fn apply(stencil: &[(isize, f64)], x: &[f64], scale: f64) -> Vec<f64> {
    let n = x.len() as isize;
    (0..n)
        .map(|k| {
            stencil
                .iter()
                .map(|&(o, w)| w * x[(k + o).rem_euclid(n) as usize])
                .sum::<f64>()
                * scale
        })
        .collect()
}

/// Staggered `(r, r′)` at every half-step, matching [`StarShape::midpoint`].
fn midpoints(x: &[f64], dth: f64) -> (Vec<f64>, Vec<f64>) {
    (apply(&MID_STENCIL, x, 1.0), apply(&STAGGERED_SLOPE_STENCIL, x, 1.0 / dth))
}

/// `(Per(x) − Per(e), |x| − |e|)` summed term by term. Stencils act on
/// `x − e` so each density difference `(q_x² − q_e²)/(q_x + q_e)` keeps full
/// relative accuracy in the size of the change.
fn perimeter_area_change(x: &[f64], e: &[f64], dth: f64) -> (f64, f64) {
    let delta: Vec<f64> = x.iter().zip(e).map(|(a, b)| a - b).collect();
    let (em, ed) = midpoints(e, dth);
    let (dm, dd) = midpoints(&delta, dth);
    let mut dper = 0.0;
    let mut dvol = 0.0;
    for k in 0..x.len() {
        let (xm, xd) = (em[k] + dm[k], ed[k] + dd[k]);
        let dq2 = dm[k] * (2.0 * em[k] + dm[k]) + dd[k] * (2.0 * ed[k] + dd[k]);
        dper += dq2 / (xm.hypot(xd) + em[k].hypot(ed[k]));
        dvol += delta[k] * (x[k] + e[k]);
    }
    (dth * dper, 0.5 * dth * dvol)
}

/// `J(F) − J(E)` for shapes on a common grid, accurate to the size of the
/// change rather than the size of `J`.
pub fn energy_change(f: &StarShape, e: &StarShape, law: &ForcingLaw) -> Result<f64> {
    if f.center() != e.center() || f.n_theta() != e.n_theta() {
        return Err(Error::param("F", "must share the center and angular grid of E"));
    }
    let (dper, dvol) = perimeter_area_change(f.radii(), e.radii(), e.dtheta());
    Ok(dper - law.antiderivative_change(area(e), dvol)?)
}

/// `I_h(F; E) − I_h(E; E) = J(F) − J(E) + d̃²(F, E)/h`.
pub fn step_objective_change(f: &StarShape, e: &StarShape, h: f64, law: &ForcingLaw) -> Result<f64> {
    Ok(energy_change(f, e, law)? + polar_pseudo_distance_sq(f, e)? / h)
}

struct Problem<'a> {
    e: &'a [f64],
    area_e: f64,
    dth: f64,
    h: f64,
    mh: f64,
    r0: f64,
    mu: f64,
    law: &'a ForcingLaw,
}

/// Adds `Σ_k g_aa a_k a_kᵀ + g_ab (a_k b_kᵀ + b_k a_kᵀ) + g_bb b_k b_kᵀ` where
/// `a_k`, `b_k` are the rows at `k` of two periodic stencils.
fn add_stencil_blocks(
    hm: &mut DMatrix<f64>,
    a: &[(isize, f64)],
    a_scale: f64,
    b: &[(isize, f64)],
    b_scale: f64,
    second: &[(f64, f64, f64)],
) {
    let n = second.len() as isize;
    let row = |st: &[(isize, f64)], scale: f64, k: usize| -> Vec<(usize, f64)> {
        st.iter()
            .map(|&(o, w)| ((k as isize + o).rem_euclid(n) as usize, w * scale))
            .collect()
    };
    for (k, &(gaa, gab, gbb)) in second.iter().enumerate() {
        let ra = row(a, a_scale, k);
        let rb = row(b, b_scale, k);
        for &(i, wi) in &ra {
            for &(j, wj) in &ra {
                hm[(i, j)] += gaa * wi * wj;
            }
            for &(j, wj) in &rb {
                hm[(i, j)] += gab * wi * wj;
                hm[(j, i)] += gab * wi * wj;
            }
        }
        for &(i, wi) in &rb {
            for &(j, wj) in &rb {
                hm[(i, j)] += gbb * wi * wj;
            }
        }
    }
}

/// Adjoint of a periodic stencil applied to per-term weights.
fn apply_adjoint(stencil: &[(isize, f64)], w: &[f64], scale: f64, j: usize) -> f64 {
    let n = w.len() as isize;
    stencil
        .iter()
        .map(|&(o, c)| c * w[(j as isize - o).rem_euclid(n) as usize])
        .sum::<f64>()
        * scale
}

const IDENTITY: [(isize, f64); 1] = [(0, 1.0)];

impl Problem<'_> {
    fn n(&self) -> usize {
        self.e.len()
    }

    fn slopes(&self, x: &[f64]) -> Vec<f64> {
        apply(&SLOPE_STENCIL, x, 1.0 / self.dth)
    }

    /// Per-sample pseudo-distance density and penalties with partials in
    /// `(r, s = r′)`.
    fn local(&self, r: f64, s: f64, e: f64) -> (f64, f64, f64) {
        let q2 = r * r + s * s;
        let q = q2.sqrt();
        let q3 = q2 * q;
        let d = r - e;
        let phi = r * d * d / 2.0 - d * d * d / 3.0;
        let phi_r = r * d - d * d / 2.0;
        let mut f = (r / q) * phi / self.h;
        let mut fr = (s * s / q3 * phi + (r / q) * phi_r) / self.h;
        let mut fs = -r * s / q3 * phi / self.h;
        let v = self.r0 - r * r / q;
        if v > 0.0 {
            f += self.mu * v * v;
            fr -= 2.0 * self.mu * v * r * (r * r + 2.0 * s * s) / q3;
            fs += 2.0 * self.mu * v * r * r * s / q3;
        }
        let u = e - self.mh - r;
        if u > 0.0 {
            f += self.mu * u * u;
            fr -= 2.0 * self.mu * u;
        }
        (f, fr, fs)
    }

    fn area(&self, x: &[f64]) -> f64 {
        0.5 * self.dth * x.iter().map(|r| r * r).sum::<f64>()
    }

    /// Penalized `I_h(x; E) − J(E)`, evaluated in difference form so that
    /// decreases far below the size of `J` stay visible.
    fn value(&self, x: &[f64]) -> Result<f64> {
        let s = self.slopes(x);
        let rest: f64 = (0..self.n()).map(|k| self.local(x[k], s[k], self.e[k]).0).sum();
        let (dper, dvol) = perimeter_area_change(x, self.e, self.dth);
        Ok(dper + self.dth * rest - self.law.antiderivative_change(self.area_e, dvol)?)
    }

    fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        let n = self.n();
        let s = self.slopes(x);
        let (fr, fs): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|k| {
                let (_, a, b) = self.local(x[k], s[k], self.e[k]);
                (a, b)
            })
            .unzip();
        let (m, d) = midpoints(x, self.dth);
        let q: Vec<f64> = m.iter().zip(&d).map(|(a, b)| a.hypot(*b)).collect();
        let pm: Vec<f64> = m.iter().zip(&q).map(|(a, q)| a / q).collect();
        let pd: Vec<f64> = d.iter().zip(&q).map(|(b, q)| b / q).collect();
        let lam = self.law.lambda(self.area(x))?;
        Ok(DVector::from_fn(n, |j, _| {
            self.dth
                * (fr[j]
                    + apply_adjoint(&SLOPE_STENCIL, &fs, 1.0 / self.dth, j)
                    + apply_adjoint(&MID_STENCIL, &pm, 1.0, j)
                    + apply_adjoint(&STAGGERED_SLOPE_STENCIL, &pd, 1.0 / self.dth, j)
                    - lam * x[j])
        }))
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n();
        let s = self.slopes(x);
        let mut hm = DMatrix::<f64>::zeros(n, n);
        // sample terms: second partials by central differences of the
        // analytic first partials
        let local2: Vec<(f64, f64, f64)> = (0..n)
            .map(|k| {
                let (r, sk, e) = (x[k], s[k], self.e[k]);
                let er = 1e-6 * r.abs().max(1e-3);
                let es = 1e-6 * r.abs().max(sk.abs()).max(1e-3);
                let (_, fr_p, fs_p) = self.local(r + er, sk, e);
                let (_, fr_m, fs_m) = self.local(r - er, sk, e);
                let (_, fr_sp, fs_sp) = self.local(r, sk + es, e);
                let (_, fr_sm, fs_sm) = self.local(r, sk - es, e);
                let frr = (fr_p - fr_m) / (2.0 * er);
                let frs = 0.5 * ((fs_p - fs_m) / (2.0 * er) + (fr_sp - fr_sm) / (2.0 * es));
                let fss = (fs_sp - fs_sm) / (2.0 * es);
                (self.dth * frr, self.dth * frs, self.dth * fss)
            })
            .collect();
        add_stencil_blocks(&mut hm, &IDENTITY, 1.0, &SLOPE_STENCIL, 1.0 / self.dth, &local2);
        // perimeter terms at half-steps: exact second partials of √(m² + d²)
        let (m, d) = midpoints(x, self.dth);
        let per2: Vec<(f64, f64, f64)> = m
            .iter()
            .zip(&d)
            .map(|(a, b)| {
                let q3 = (a * a + b * b).powf(1.5);
                (self.dth * b * b / q3, -self.dth * a * b / q3, self.dth * a * a / q3)
            })
            .collect();
        add_stencil_blocks(
            &mut hm,
            &MID_STENCIL,
            1.0,
            &STAGGERED_SLOPE_STENCIL,
            1.0 / self.dth,
            &per2,
        );
        let a = self.area(x);
        let lam = self.law.lambda(a)?;
        let dlam = self.law.lambda_prime(a)?;
        let xv = DVector::from_column_slice(x);
        hm -= (dlam * self.dth * self.dth) * (&xv * xv.transpose());
        for k in 0..n {
            hm[(k, k)] -= lam * self.dth;
        }
        Ok(hm)
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let s = self.slopes(x);
        (0..self.n())
            .map(|k| {
                let star = self.r0 - x[k] * x[k] / x[k].hypot(s[k]);
                let gap = self.e[k] - self.mh - x[k];
                star.max(gap).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Damped Newton from `x`; returns whether the gradient tolerance was met.
    fn minimize(&self, x: &mut Vec<f64>, opts: &OptimizerOptions) -> Result<bool> {
        let mut fx = self.value(x)?;
        for _ in 0..opts.max_newton {
            let g = self.gradient(x)?;
            if g.amax() <= opts.grad_tol {
                return Ok(true);
            }
            let mut hm = self.hessian(x)?;
            let mut p = None;
            let scale = (0..self.n()).map(|k| hm[(k, k)].abs()).fold(0.0, f64::max);
            let mut shift = 0.0;
            for _ in 0..30 {
                if let Some(ch) = hm.clone().cholesky() {
                    p = Some(-ch.solve(&g));
                    break;
                }
                let next = if shift == 0.0 { 1e-10 * scale } else { 10.0 * shift };
                for k in 0..self.n() {
                    hm[(k, k)] += next - shift;
                }
                shift = next;
            }
            let mut p = p.unwrap_or_else(|| -g.clone());
            let mut slope = g.dot(&p);
            if !(slope < 0.0) {
                p = -g.clone();
                slope = -g.dot(&g);
            }
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-12 {
                let cand: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + alpha * b).collect();
                if cand.iter().all(|r| *r > 0.0) {
                    if let Ok(fc) = self.value(&cand) {
                        if fc <= fx + 1e-4 * alpha * slope {
                            *x = cand;
                            fx = fc;
                            moved = true;
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                // no representable decrease left
                return Ok(g.amax() <= 1e3 * opts.grad_tol);
            }
        }
        Ok(self.gradient(x)?.amax() <= opts.grad_tol)
    }
}

/// One restricted minimizing-movement step from `e`.
pub fn one_step(e: &StarShape, config: &AtwConfig, law: &ForcingLaw) -> Result<(StarShape, StepCertificate)> {
    config.validate()?;
    let star_e = star_radius(e, e.center()).map_err(|_| Error::Hypothesis("E is not star-shaped about its center".into()))?;
    if star_e < config.r0 {
        return Err(Error::Hypothesis(format!(
            "E has star radius {star_e} below r0 = {}",
            config.r0
        )));
    }
    let opts = &config.optimizer;
    let mh = config.step_bound();
    let mut prob = Problem {
        e: e.radii(),
        area_e: area(e),
        dth: e.dtheta(),
        h: config.h,
        mh,
        r0: config.r0,
        mu: opts.penalty_start,
        law,
    };
    let mut x = e.radii().to_vec();
    let tol = opts.feasibility_tol * mh.min(config.r0);
    let mut converged = false;
    for _ in 0..opts.penalty_rounds.max(1) {
        converged = prob.minimize(&mut x, opts)?;
        if prob.violation(&x) <= tol {
            break;
        }
        prob.mu *= 2.0;
    }

    let candidate = project(e, &x, config)?;
    let (f, converged) = match candidate {
        Some(f) if step_objective_change(&f, e, config.h, law)? <= 0.0 => (f, converged),
        _ => (e.clone(), false),
    };
    let cert = certify(0, &f, e, config, law, converged)?;
    Ok((f, cert))
}

/// Clamps onto the Hausdorff bound and blends toward `E` until the star
/// bound holds; tightens the clamp if interpolation overshoots the bound.
fn project(e: &StarShape, x: &[f64], config: &AtwConfig) -> Result<Option<StarShape>> {
    let mh = config.step_bound();
    for j in 0..20 {
        let bound = mh * (1.0 - 1e-9) * 0.9f64.powi(j);
        let clamped: Vec<f64> = x.iter().zip(e.radii()).map(|(r, er)| r.max(er - bound)).collect();
        let blend = |t: f64| -> Result<StarShape> {
            e.with_radii(clamped.iter().zip(e.radii()).map(|(r, er)| er + t * (r - er)).collect())
        };
        let star_ok = |s: &StarShape| star_radius(s, s.center()).map_or(false, |v| v >= config.r0);
        let mut f = blend(1.0)?;
        if !star_ok(&f) {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if star_ok(&blend(mid)?) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            f = blend(lo)?;
        }
        if admissibility_check(&f, e, config)?.admissible() {
            return Ok(Some(f));
        }
    }
    Ok(None)
}

fn certify(
    k: usize,
    f: &StarShape,
    e: &StarShape,
    config: &AtwConfig,
    law: &ForcingLaw,
    converged: bool,
) -> Result<StepCertificate> {
    let j_before = law.energy(e)?.total;
    let dj = energy_change(f, e, law)?;
    let d2 = polar_pseudo_distance_sq(f, e)?;
    let adm = admissibility_check(f, e, config)?;
    Ok(StepCertificate {
        k,
        j_before,
        j_after: j_before + dj,
        d_tilde: d2.max(0.0).sqrt(),
        ih_decrease: -(dj + d2 / config.h),
        star_margin: adm.star_margin,
        hausdorff_margin: adm.hausdorff_margin,
        converged,
    })
}

#[derive(Debug, Clone)]
pub struct AtwRun {
    pub trajectory: Trajectory,
    pub certificates: Vec<StepCertificate>,
}

/// Iterates [`one_step`] `⌈t_end/h⌉` times; iterate `k` sits at time `k·h`.
pub fn discrete_flow(e0: &StarShape, config: &AtwConfig, law: &ForcingLaw, t_end: f64) -> Result<AtwRun> {
    config.validate()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param("t_end", "must be finite and non-negative"));
    }
    let steps = (t_end / config.h - 1e-9).ceil().max(0.0) as usize;
    let mut traj = Trajectory::new();
    traj.record(0, 0.0, e0.clone(), law)?;
    let mut certificates = Vec::with_capacity(steps);
    let mut e = e0.clone();
    for k in 1..=steps {
        let (f, mut cert) = match one_step(&e, config, law) {
            Ok(v) => v,
            Err(err) => {
                traj.terminate(format!("step {k}: {err}"));
                break;
            }
        };
        cert.k = k;
        certificates.push(cert);
        e = f;
        if k % config.snapshot_stride == 0 || k == steps {
            traj.record(k, k as f64 * config.h, e.clone(), law)?;
        }
    }
    Ok(AtwRun {
        trajectory: traj,
        certificates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub steps: usize,
    /// `min_k (J_k − J_{k+1} − d̃²/h)`.
    pub min_step_gap: f64,
    pub steps_hold: bool,
    pub energy_monotone: bool,
    /// Largest `C` with `C·d̃²(E_{t₁}, E_{t₂})/(t₂ − t₁) ≤ J(E_{t₁}) − J(E_{t₂})`
    /// over all snapshot pairs that moved.
    pub best_constant: f64,
}

/// Checks the per-step dissipation inequality on every certificate and fits
/// the two-time constant over snapshot pairs.
pub fn dissipation_report(traj: &Trajectory, certificates: &[StepCertificate], tol: f64) -> Result<DissipationReport> {
    let min_step_gap = certificates
        .iter()
        .map(|c| c.ih_decrease)
        .fold(f64::INFINITY, f64::min);
    let energies: Vec<f64> = traj.series().iter().map(|r| r.energy).collect();
    let energy_monotone = energies.windows(2).all(|w| w[1] <= w[0] + tol);
    let snaps = traj.snapshots();
    let stride = (snaps.len() / 100).max(1);
    let picked: Vec<usize> = (0..snaps.len()).step_by(stride).collect();
    let mut best = f64::INFINITY;
    for (a, &i) in picked.iter().enumerate() {
        for &j in &picked[a + 1..] {
            let d2 = polar_pseudo_distance_sq(&snaps[i].shape, &snaps[j].shape)?;
            if d2 > 1e-14 {
                let drop = energies[i] - energies[j];
                best = best.min(drop * (snaps[j].t - snaps[i].t) / d2);
            }
        }
    }
    Ok(DissipationReport {
        steps: certificates.len(),
        min_step_gap: if certificates.is_empty() { 0.0 } else { min_step_gap },
        steps_hold: certificates.iter().all(|c| c.ih_decrease >= -tol),
        energy_monotone,
        best_constant: if best.is_finite() { best } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{circle_ode_oracle, normal_velocity, ForcingMode};
    use crate::geometry::{offset, Vec2};
    use std::f64::consts::PI;

    fn unit() -> ForcingLaw {
        ForcingLaw::new(1.0, 1.0, 2).unwrap()
    }

    #[test]
    fn stationary_disk_stays() {
        let e = StarShape::disk(Vec2::zeros(), 1.0 / PI, 128).unwrap();
        let (f, cert) = one_step(&e, &AtwConfig::new(1e-2, 10.0, 0.1), &unit()).unwrap();
        assert!(f.radii().iter().all(|r| (r - 1.0 / PI).abs() < 1e-9));
        assert!(cert.d_tilde < 1e-6);
        assert!(cert.ih_decrease >= 0.0);
    }

    #[test]
    fn disk_step_matches_velocity() {
        let law = unit();
        let e = StarShape::disk(Vec2::zeros(), 0.5, 128).unwrap();
        let h = 1e-3;
        let (f, cert) = one_step(&e, &AtwConfig::new(h, 100.0, 0.1), &law).unwrap();
        let v = normal_velocity(&e, 0, &law, &ForcingMode::Normalized, 0.0).unwrap();
        let expected = 0.5 + h * v;
        assert!(f.radii().iter().all(|r| (r - expected).abs() < 5e-6), "{} vs {expected}", f.radii()[0]);
        assert!(cert.converged && cert.ih_decrease > 0.0);
    }

    #[test]
    fn small_m_makes_the_bound_bind() {
        let law = unit();
        let e = StarShape::disk(Vec2::zeros(), 0.5, 128).unwrap();
        let cfg = AtwConfig::new(1e-3, 0.01, 0.1);
        let (f, cert) = one_step(&e, &cfg, &law).unwrap();
        let mh = cfg.step_bound();
        assert!(cert.hausdorff_margin >= 0.0);
        assert!(cert.hausdorff_margin < 0.02 * mh, "{}", cert.hausdorff_margin);
        assert!(f.radii().iter().all(|r| (0.5 - r - mh).abs() < 0.02 * mh));
    }

    #[test]
    fn admissibility_margins() {
        let cfg = AtwConfig::new(1e-2, 1.0, 0.1);
        let e = StarShape::cosine_perturbation(0.5, 0.05, 3, 128).unwrap();
        let same = admissibility_check(&e, &e, &cfg).unwrap();
        assert_eq!(same.hausdorff_margin, cfg.step_bound());
        let eroded = offset(&e, 2.0 * cfg.step_bound()).unwrap();
        let m = admissibility_check(&eroded, &e, &cfg).unwrap();
        assert!((m.hausdorff_margin + cfg.step_bound()).abs() < 1e-3 * 0.5 + 2e-4, "{}", m.hausdorff_margin);
        let tiny = StarShape::disk(Vec2::zeros(), 0.05, 128).unwrap();
        assert!(admissibility_check(&tiny, &e, &cfg).unwrap().star_margin < 0.0);
        assert!(one_step(&tiny, &cfg, &unit()).is_err());
    }

    #[test]
    fn discrete_flow_dissipates_and_converges() {
        let law = unit();
        let e0 = StarShape::disk(Vec2::zeros(), 0.5, 64).unwrap();
        let terminal = |h: f64| {
            let run = discrete_flow(&e0, &AtwConfig::new(h, 50.0, 0.1), &law, 0.2).unwrap();
            let report = dissipation_report(&run.trajectory, &run.certificates, 1e-12).unwrap();
            assert!(report.steps_hold && report.energy_monotone);
            assert!(report.best_constant > 0.0);
            assert!(run.certificates.iter().all(|c| c.star_margin >= 0.0 && c.hausdorff_margin >= 0.0));
            run.trajectory.last().unwrap().shape.radii()[0]
        };
        let exact = circle_ode_oracle(0.5, &law, &ForcingMode::Normalized, &[0.2]).unwrap()[0];
        let (a, b) = ((terminal(0.02) - exact).abs(), (terminal(0.01) - exact).abs());
        assert!(b < a && b < 3e-3, "{a} {b}");
    }

    #[test]
    fn reversed_trajectory_fails_the_report() {
        let law = unit();
        let e0 = StarShape::cosine_perturbation(0.4, 0.05, 3, 64).unwrap();
        let run = discrete_flow(&e0, &AtwConfig::new(5e-3, 10.0, 0.1), &law, 0.05).unwrap();
        let mut reversed = Trajectory::new();
        for (i, s) in run.trajectory.snapshots().iter().rev().enumerate() {
            reversed.record(i, i as f64 * 5e-3, s.shape.clone(), &law).unwrap();
        }
        let certs: Vec<StepCertificate> = run
            .certificates
            .iter()
            .rev()
            .map(|c| StepCertificate {
                j_before: c.j_after,
                j_after: c.j_before,
                ih_decrease: c.j_after - c.j_before - c.d_tilde * c.d_tilde / 5e-3,
                ..*c
            })
            .collect();
        let report = dissipation_report(&reversed, &certs, 1e-12).unwrap();
        assert!(!report.energy_monotone && !report.steps_hold);
    }

    #[test]
    fn energy_change_matches_direct_difference() {
        let law = unit();
        let e = StarShape::cosine_perturbation(0.4, 0.05, 3, 128).unwrap();
        let f = StarShape::cosine_perturbation(0.41, 0.03, 3, 128).unwrap();
        let direct = law.energy(&f).unwrap().total - law.energy(&e).unwrap().total;
        assert!((energy_change(&f, &e, &law).unwrap() - direct).abs() < 1e-13);
        let g = StarShape::cosine_perturbation(0.4, 0.05 + 1e-12, 3, 128).unwrap();
        let tiny = energy_change(&g, &e, &law).unwrap();
        assert!(tiny != 0.0 && tiny.abs() < 1e-11);
    }

    #[test]
    fn config_json_uses_capital_m() {
        let c: AtwConfig = serde_json::from_str(r#"{"h": 0.01, "M": 4, "r0": 0.1}"#).unwrap();
        assert_eq!(c.m, 4.0);
        assert_eq!(c.optimizer, OptimizerOptions::default());
        assert!(AtwConfig::new(0.0, 1.0, 0.1).validate().is_err());
    }
}
