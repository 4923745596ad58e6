//! Level-set engine: the domain is the positive set of a grid function `u`
//! evolved by `u_t = |Du|·max{div(Du/|Du|) + η, −M}`.

use std::f64::consts::TAU;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::ForcingMode;
use crate::forcing::ForcingLaw;
use crate::geometry::{StarShape, Vec2, DENSE_FACTOR};
use crate::raster::{nearest_point_transform, Lattice};
use crate::trajectory::Trajectory;

/// Minimum distance, in cells, between the initial boundary and the grid edge.
pub const MIN_CLEARANCE_CELLS: f64 = 5.0;

/// Square grid `[-half_width, half_width]²` with spacing `dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dx: f64,
    pub half_width: f64,
}

impl GridSpec {
    pub fn new(dx: f64, half_width: f64) -> Self {
        Self { dx, half_width }
    }

    /// Smallest centered grid leaving `margin_cells` cells around `shape`.
    pub fn around(shape: &StarShape, dx: f64, margin_cells: f64) -> Self {
        let reach = shape
            .dense_boundary(DENSE_FACTOR)
            .iter()
            .map(|p| p.x.abs().max(p.y.abs()))
            .fold(0.0, f64::max);
        Self {
            dx,
            half_width: reach + margin_cells * dx,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::param("dx", "must be positive"));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::param("half_width", "must be positive"));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::centered(self.half_width, self.dx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSetConfig {
    pub forcing: ForcingMode,
    /// Fraction of the parabolic stability bound used per step, in `(0, 1]`.
    #[serde(default = "default_dt_safety")]
    pub dt_safety: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_reinit")]
    pub reinit_every: usize,
    /// Curvature regularization `ε` in units of `Δx`.
    #[serde(default = "default_eps")]
    pub epsilon_factor: f64,
    /// Rays per extracted snapshot; defaults to the initial shape's grid.
    #[serde(default)]
    pub n_theta: Option<usize>,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
}

fn default_dt_safety() -> f64 {
    1.0
}

fn default_stride() -> usize {
    500
}

fn default_reinit() -> usize {
    50
}

fn default_eps() -> f64 {
    1e-6
}

impl LevelSetConfig {
    pub fn new(forcing: ForcingMode, t_end: f64) -> Self {
        Self {
            forcing,
            dt_safety: default_dt_safety(),
            t_end,
            snapshot_stride: default_stride(),
            reinit_every: default_reinit(),
            epsilon_factor: default_eps(),
            n_theta: None,
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
        if self.reinit_every == 0 {
            return Err(Error::param("reinit_every", "must be at least 1"));
        }
        if !(self.epsilon_factor > 0.0 && self.epsilon_factor.is_finite()) {
            return Err(Error::param("epsilon_factor", "must be positive"));
        }
        if matches!(self.n_theta, Some(n) if n < 8) {
            return Err(Error::param("n_theta", "must be at least 8"));
        }
        if self.checkpoints.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::param("checkpoints", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Grid function whose positive set is the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    lattice: Lattice,
    values: Vec<f64>,
    time: f64,
}

impl LevelSetField {
    pub fn new(lattice: Lattice, values: Vec<f64>, time: f64) -> Result<Self> {
        if lattice.nx < 3 || lattice.ny < 3 || !(lattice.dx > 0.0) {
            return Err(Error::GridTooSmall(format!("{}×{} nodes", lattice.nx, lattice.ny)));
        }
        if values.len() != lattice.len() {
            return Err(Error::Format(format!(
                "{} values for a {}×{} lattice",
                values.len(),
                lattice.nx,
                lattice.ny
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite field value".into()));
        }
        if !values.iter().any(|v| *v > 0.0) {
            return Err(Error::EmptyPositiveSet);
        }
        Ok(Self {
            lattice,
            values,
            time,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.lattice.index(i, j)]
    }

    /// Bilinear interpolation, clamped to the grid.
    pub fn value_at(&self, p: Vec2) -> f64 {
        let lat = &self.lattice;
        let fx = ((p.x - lat.origin[0]) / lat.dx).clamp(0.0, (lat.nx - 1) as f64);
        let fy = ((p.y - lat.origin[1]) / lat.dx).clamp(0.0, (lat.ny - 1) as f64);
        let i = (fx.floor() as usize).min(lat.nx - 2);
        let j = (fy.floor() as usize).min(lat.ny - 2);
        let (a, b) = (fx - i as f64, fy - j as f64);
        let u = &self.values;
        let k = lat.index(i, j);
        let (v00, v10, v01, v11) = (u[k], u[k + 1], u[k + lat.nx], u[k + lat.nx + 1]);
        (1.0 - b) * ((1.0 - a) * v00 + a * v10) + b * ((1.0 - a) * v01 + a * v11)
    }

    /// Central-difference `|Du|` at an interior node.
    pub fn gradient_norm(&self, i: usize, j: usize) -> f64 {
        let h = 2.0 * self.lattice.dx;
        let ux = (self.at(i + 1, j) - self.at(i - 1, j)) / h;
        let uy = (self.at(i, j + 1) - self.at(i, j - 1)) / h;
        ux.hypot(uy)
    }

    /// Area of `{u > 0}` for the piecewise-linear interpolant on the two
    /// triangles of every cell.
    pub fn positive_area(&self) -> f64 {
        let lat = &self.lattice;
        let u = &self.values;
        let half = 0.5 * lat.dx * lat.dx;
        let mut total = 0.0;
        for j in 0..lat.ny - 1 {
            let row = j * lat.nx;
            for i in 0..lat.nx - 1 {
                let k = row + i;
                let (v00, v10, v01, v11) = (u[k], u[k + 1], u[k + lat.nx], u[k + lat.nx + 1]);
                if v00 > 0.0 && v10 > 0.0 && v01 > 0.0 && v11 > 0.0 {
                    total += 2.0 * half;
                } else if v00 > 0.0 || v10 > 0.0 || v01 > 0.0 || v11 > 0.0 {
                    total += half * (triangle_fraction(v00, v10, v11) + triangle_fraction(v00, v11, v01));
                }
            }
        }
        total
    }

    /// True when some node lies within `3Δx` of the zero level.
    pub fn interface_present(&self) -> bool {
        let band = 3.0 * self.lattice.dx;
        self.values.iter().any(|v| v.abs() < band)
    }
}

/// Fraction of a triangle where the linear interpolant of its vertex values
/// is positive.
fn triangle_fraction(a: f64, b: f64, c: f64) -> f64 {
    let pos = [a > 0.0, b > 0.0, c > 0.0];
    let cut = |p: f64, q: f64, r: f64| p * p / ((p - q) * (p - r));
    match pos {
        [true, true, true] => 1.0,
        [false, false, false] => 0.0,
        [true, false, false] => cut(a, b, c),
        [false, true, false] => cut(b, a, c),
        [false, false, true] => cut(c, a, b),
        [false, true, true] => 1.0 - cut(a, b, c),
        [true, false, true] => 1.0 - cut(b, a, c),
        [true, true, false] => 1.0 - cut(c, a, b),
    }
}

/// Signed distance to `∂shape`, positive inside.
pub fn init_from_shape(shape: &StarShape, grid: &GridSpec) -> Result<LevelSetField> {
    grid.validate()?;
    let lat = grid.lattice();
    let boundary = shape.dense_boundary(DENSE_FACTOR);
    let clearance = boundary
        .iter()
        .map(|p| {
            (p.x - lat.origin[0])
                .min(lat.x_max() - p.x)
                .min(p.y - lat.origin[1])
                .min(lat.y_max() - p.y)
        })
        .fold(f64::INFINITY, f64::min);
    if clearance < MIN_CLEARANCE_CELLS * lat.dx {
        return Err(Error::GridTooSmall(format!(
            "boundary clearance {clearance:.4} is below {MIN_CLEARANCE_CELLS}Δx = {:.4}",
            MIN_CLEARANCE_CELLS * lat.dx
        )));
    }
    let mut values = Vec::with_capacity(lat.len());
    for j in 0..lat.ny {
        for i in 0..lat.nx {
            let x = lat.node(i, j);
            let d = smooth_boundary_distance(shape, x, &boundary);
            values.push(if shape.contains(x) { d } else { -d });
        }
    }
    LevelSetField::new(lat, values, 0.0)
}

/// Distance from `x` to the interpolated boundary curve: the nearest
/// polyline segment brackets the foot point, which golden-section search then
/// refines on the curve itself. Polyline kinks alone would leave `O(h²)` noise
/// that second differences amplify into curvature errors.
fn smooth_boundary_distance(shape: &StarShape, x: Vec2, boundary: &[Vec2]) -> f64 {
    let m = boundary.len();
    let (mut best, mut arg) = (f64::INFINITY, 0);
    for k in 0..m {
        let a = boundary[k];
        let e = boundary[(k + 1) % m] - a;
        let t = ((x - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
        let d2 = (a + t * e - x).norm_squared();
        if d2 < best {
            best = d2;
            arg = k;
        }
    }
    let c = shape.center();
    let dist2 = |t: f64| (c + shape.radius_at(t) * Vec2::new(t.cos(), t.sin()) - x).norm_squared();
    let step = TAU / m as f64;
    let (mut lo, mut hi) = ((arg as f64 - 1.0) * step, (arg as f64 + 2.0) * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fa, mut fb) = (dist2(a), dist2(b));
    for _ in 0..80 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = dist2(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = dist2(b);
        }
    }
    fa.min(fb).sqrt()
}

/// Parabolic stability bound `0.25·Δx²/(1 + Δx·|η|)`.
pub fn max_dt(field: &LevelSetField, law: &ForcingLaw, mode: &ForcingMode) -> Result<f64> {
    let eta = mode.eta(law, field.positive_area(), field.time)?;
    Ok(cfl_bound(field.lattice.dx, eta))
}

fn cfl_bound(dx: f64, eta: f64) -> f64 {
    0.25 * dx * dx / (1.0 + dx * eta.abs())
}

pub fn step_grid(field: &LevelSetField, dt: f64, law: &ForcingLaw, mode: &ForcingMode) -> Result<LevelSetField> {
    step_grid_with(field, dt, law, mode, default_eps())
}

/// One explicit step. The curvature term uses central differences with
/// `κ_ε = div(Du/√(|Du|² + ε²))`, `ε = epsilon_factor·Δx`; the transport
/// term `η|Du|` uses Godunov upwinding of second-order ENO differences. Where the floor binds the whole
/// speed becomes `−M`, transported upwind. Boundaries are reflecting.
pub fn step_grid_with(
    field: &LevelSetField,
    dt: f64,
    law: &ForcingLaw,
    mode: &ForcingMode,
    epsilon_factor: f64,
) -> Result<LevelSetField> {
    let eta = mode.eta(law, field.positive_area(), field.time)?;
    advance(field, dt, eta, mode.floor(), epsilon_factor)
}

/// The update of [`step_grid_with`] with `η` already evaluated.
fn advance(field: &LevelSetField, dt: f64, eta: f64, floor: Option<f64>, epsilon_factor: f64) -> Result<LevelSetField> {
    let lat = field.lattice;
    let dx = lat.dx;
    let bound = cfl_bound(dx, eta);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, bound });
    }
    let eps2 = (epsilon_factor * dx).powi(2);
    let (nx, ny) = (lat.nx, lat.ny);
    let u = &field.values;
    let inv = 1.0 / dx;
    let inv2 = 0.5 / dx;
    let inv_sq = 1.0 / (dx * dx);
    let inv_xy = 0.25 / (dx * dx);
    // undivided second differences, reflected at the boundary
    let mut sxx = vec![0.0; u.len()];
    let mut syy = vec![0.0; u.len()];
    for j in 0..ny {
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j == ny - 1 { ny - 2 } else { j + 1 };
        for i in 0..nx {
            let im = if i == 0 { 1 } else { i - 1 };
            let ip = if i == nx - 1 { nx - 2 } else { i + 1 };
            let c = u[j * nx + i];
            sxx[j * nx + i] = u[j * nx + ip] - 2.0 * c + u[j * nx + im];
            syy[j * nx + i] = u[jp * nx + i] - 2.0 * c + u[jm * nx + i];
        }
    }
    let mut next = vec![0.0; u.len()];
    for j in 0..ny {
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j == ny - 1 { ny - 2 } else { j + 1 };
        let (row, row_m, row_p) = (j * nx, jm * nx, jp * nx);
        for i in 0..nx {
            let im = if i == 0 { 1 } else { i - 1 };
            let ip = if i == nx - 1 { nx - 2 } else { i + 1 };
            let k = row + i;
            let c = u[k];
            let (l, r) = (u[row + im], u[row + ip]);
            let (d, t) = (u[row_m + i], u[row_p + i]);
            let ux = (r - l) * inv2;
            let uy = (t - d) * inv2;
            let uxx = sxx[k] * inv_sq;
            let uyy = syy[k] * inv_sq;
            let uxy = (u[row_p + ip] - u[row_p + im] - u[row_m + ip] + u[row_m + im]) * inv_xy;
            let g2 = ux * ux + uy * uy;
            let q = g2 + eps2;
            let kappa = (uxx * (uy * uy + eps2) - 2.0 * ux * uy * uxy + uyy * (ux * ux + eps2)) / (q * q.sqrt());
            let grad = Godunov {
                xm: (c - l + 0.5 * minmod(sxx[row + im], sxx[k])) * inv,
                xp: (r - c - 0.5 * minmod(sxx[k], sxx[row + ip])) * inv,
                ym: (c - d + 0.5 * minmod(syy[row_m + i], syy[k])) * inv,
                yp: (t - c - 0.5 * minmod(syy[k], syy[row_p + i])) * inv,
            };
            let rate = match floor {
                Some(m) if kappa + eta < -m => -m * grad.norm(-m),
                _ => g2.sqrt() * kappa + eta * grad.norm(eta),
            };
            next[k] = c + dt * rate;
        }
    }
    LevelSetField::new(lat, next, field.time + dt)
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Second-order ENO one-sided differences at a node.
struct Godunov {
    xm: f64,
    xp: f64,
    ym: f64,
    yp: f64,
}

impl Godunov {
    /// Upwind `|Du|` for `u_t = F|Du|` with `u` positive inside.
    #[inline]
    fn norm(&self, f: f64) -> f64 {
        let axis = |m: f64, p: f64| {
            if f >= 0.0 {
                m.min(0.0).powi(2).max(p.max(0.0).powi(2))
            } else {
                p.min(0.0).powi(2).max(m.max(0.0).powi(2))
            }
        };
        (axis(self.xm, self.xp) + axis(self.ym, self.yp)).sqrt()
    }
}

/// Nodes closer than `BAND` cells to the zero level are projected onto it
/// individually so that the interpolant near the front stays accurate.
const BAND: f64 = 3.0;

/// Restores signed distance while keeping the sign of every node. Nodes with
/// a neighbour of opposite sign, and nodes within the band, are seeded with
/// their closest point on the zero level of the bicubic interpolant;
/// distances propagate from there.
pub fn reinitialize(field: &LevelSetField) -> LevelSetField {
    let lat = field.lattice;
    let u = &field.values;
    let (nx, ny) = (lat.nx, lat.ny);
    let mut seeds: Vec<Option<Vec2>> = vec![None; lat.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = lat.index(i, j);
            let inside = u[k] > 0.0;
            let (im, ip) = (i.saturating_sub(1), (i + 1).min(nx - 1));
            let (jm, jp) = (j.saturating_sub(1), (j + 1).min(ny - 1));
            let front = [(im, j), (ip, j), (i, jm), (i, jp)]
                .iter()
                .any(|&(a, b)| (u[lat.index(a, b)] > 0.0) != inside);
            if !front && u[k].abs() >= BAND * lat.dx {
                continue;
            }
            seeds[k] = Some(closest_zero(&lat, u, lat.node(i, j)));
        }
    }
    let dist = nearest_point_transform(&lat, &seeds);
    let values = u
        .iter()
        .zip(&dist)
        .map(|(v, d)| if *v > 0.0 { *d } else { -*d })
        .collect();
    LevelSetField {
        lattice: lat,
        values,
        time: field.time,
    }
}

/// Catmull-Rom weights and their derivatives at `s ∈ [0, 1]`.
fn cubic_weights(s: f64) -> ([f64; 4], [f64; 4]) {
    let (s2, s3) = (s * s, s * s * s);
    (
        [
            0.5 * (-s + 2.0 * s2 - s3),
            0.5 * (2.0 - 5.0 * s2 + 3.0 * s3),
            0.5 * (s + 4.0 * s2 - 3.0 * s3),
            0.5 * (s3 - s2),
        ],
        [
            0.5 * (-1.0 + 4.0 * s - 3.0 * s2),
            0.5 * (9.0 * s2 - 10.0 * s),
            0.5 * (1.0 + 8.0 * s - 9.0 * s2),
            0.5 * (3.0 * s2 - 2.0 * s),
        ],
    )
}

/// Bicubic Catmull-Rom interpolant of `u` and its gradient at `p`.
fn bicubic(lat: &Lattice, u: &[f64], p: Vec2) -> (f64, Vec2) {
    let fx = ((p.x - lat.origin[0]) / lat.dx).clamp(0.0, (lat.nx - 1) as f64);
    let fy = ((p.y - lat.origin[1]) / lat.dx).clamp(0.0, (lat.ny - 1) as f64);
    let i = (fx.floor() as usize).min(lat.nx - 2);
    let j = (fy.floor() as usize).min(lat.ny - 2);
    let (wx, dwx) = cubic_weights(fx - i as f64);
    let (wy, dwy) = cubic_weights(fy - j as f64);
    let clamp = |a: isize, n: usize| a.clamp(0, n as isize - 1) as usize;
    let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
    for b in 0..4 {
        let jj = clamp(j as isize + b as isize - 1, lat.ny);
        for a in 0..4 {
            let ii = clamp(i as isize + a as isize - 1, lat.nx);
            let val = u[lat.index(ii, jj)];
            v += wx[a] * wy[b] * val;
            gx += dwx[a] * wy[b] * val;
            gy += wx[a] * dwy[b] * val;
        }
    }
    (v, Vec2::new(gx, gy) / lat.dx)
}

/// Closest point to `x` on the zero level of the bicubic interpolant, by
/// alternating a Newton step onto the level with a tangential correction
/// towards `x`.
fn closest_zero(lat: &Lattice, u: &[f64], x: Vec2) -> Vec2 {
    let mut y = x;
    let tol = (1e-6 * lat.dx).powi(2);
    for _ in 0..20 {
        let (v, g) = bicubic(lat, u, y);
        let g2 = g.norm_squared();
        if g2 == 0.0 {
            break;
        }
        let onto = -(v / g2) * g;
        let d = x - y;
        let along = d - (d.dot(&g) / g2) * g;
        y += onto + along;
        if onto.norm_squared() + along.norm_squared() < tol {
            break;
        }
    }
    if (y - x).norm() > (BAND + 1.0) * lat.dx {
        // a diverged iterate is worse than the linear projection
        let (v, g) = bicubic(lat, u, x);
        let g2 = g.norm_squared();
        return if g2 > 0.0 { x - (v / g2) * g } else { x };
    }
    y
}

/// Casts `n_theta` rays from `center` and locates the zero level on each by
/// bisection of the bilinear interpolant. A ray that leaves and re-enters the
/// positive set is reported as a star-shapedness failure.
pub fn extract_shape(field: &LevelSetField, center: Vec2, n_theta: usize) -> Result<StarShape> {
    let lat = &field.lattice;
    if field.value_at(center) <= 0.0 {
        return Err(Error::PointOutside {
            x: center.x,
            y: center.y,
        });
    }
    let step = 0.25 * lat.dx;
    let mut radii = Vec::with_capacity(n_theta);
    for k in 0..n_theta {
        let angle = TAU * k as f64 / n_theta as f64;
        let dir = Vec2::new(angle.cos(), angle.sin());
        let reach = exit_distance(lat, center, dir);
        let samples = (reach / step).floor() as usize;
        let g = |s: f64| field.value_at(center + s * dir);
        let mut prev = g(0.0);
        let mut crossings = 0;
        let mut exit = None;
        for m in 1..=samples {
            let s = m as f64 * step;
            let cur = g(s);
            if (prev > 0.0) != (cur > 0.0) {
                crossings += 1;
                if exit.is_none() {
                    let (mut lo, mut hi) = (s - step, s);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if g(mid) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    exit = Some(0.5 * (lo + hi));
                }
            }
            prev = cur;
        }
        match (exit, crossings) {
            (Some(r), 1) => radii.push(r),
            (None, _) => {
                return Err(Error::GridTooSmall(format!(
                    "positive set reaches the grid edge at angle {angle:.4}"
                )))
            }
            (_, n) => return Err(Error::NotStarShaped { angle, crossings: n }),
        }
    }
    StarShape::new(center, radii)
}

/// Distance from `p` along `dir` to the lattice edge.
fn exit_distance(lat: &Lattice, p: Vec2, dir: Vec2) -> f64 {
    let mut best = f64::INFINITY;
    for (pc, dc, lo, hi) in [
        (p.x, dir.x, lat.origin[0], lat.x_max()),
        (p.y, dir.y, lat.origin[1], lat.y_max()),
    ] {
        if dc > 1e-15 {
            best = best.min((hi - pc) / dc);
        } else if dc < -1e-15 {
            best = best.min((lo - pc) / dc);
        }
    }
    best.max(0.0)
}

/// Runs the grid engine, returning the recorded trajectory and the final field.
pub fn evolve_grid_with_field(
    shape0: &StarShape,
    grid: &GridSpec,
    config: &LevelSetConfig,
    law: &ForcingLaw,
) -> Result<(Trajectory, LevelSetField)> {
    config.validate()?;
    let mut field = init_from_shape(shape0, grid)?;
    let center = shape0.center();
    let n_theta = config.n_theta.unwrap_or(shape0.n_theta());
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

    let mut k = 0;
    for &stop in &stops {
        while field.time < stop {
            let t = field.time;
            let eta = match config.forcing.eta(law, field.positive_area(), t) {
                Ok(eta) => eta,
                Err(e) => {
                    traj.terminate(format!("{e}"));
                    return Ok((traj, field));
                }
            };
            let mut dt = config.dt_safety * cfl_bound(field.lattice.dx, eta);
            let landing = t + dt >= stop * (1.0 - 1e-14);
            if landing {
                // never exceed the bound by the rounding of `stop − t`
                dt = (stop - t).min(dt);
            }
            match advance(&field, dt, eta, config.forcing.floor(), config.epsilon_factor) {
                Ok(mut next) => {
                    if landing {
                        next.time = stop;
                    }
                    field = next;
                }
                Err(e) => {
                    traj.terminate(format!("{e}"));
                    return Ok((traj, field));
                }
            }
            k += 1;
            if k % config.reinit_every == 0 {
                field = reinitialize(&field);
            }
            if landing || k % config.snapshot_stride == 0 {
                let recorded = extract_shape(&field, center, n_theta)
                    .and_then(|s| traj.record(k, field.time, s, law));
                if let Err(e) = recorded {
                    traj.terminate(format!("{e}"));
                    return Ok((traj, field));
                }
            }
        }
    }
    Ok((traj, field))
}

pub fn evolve_grid(
    shape0: &StarShape,
    grid: &GridSpec,
    config: &LevelSetConfig,
    law: &ForcingLaw,
) -> Result<Trajectory> {
    Ok(evolve_grid_with_field(shape0, grid, config, law)?.0)
}

/// Layout of the values file next to a field header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldEncoding {
    /// `nx·ny` IEEE-754 doubles, little-endian, row-major with `i` fastest.
    F64Le,
    /// One CSV line per row `j`, `nx` values each.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub origin: [f64; 2],
    pub time: f64,
    pub encoding: FieldEncoding,
    /// Values file, relative to the header.
    pub data: String,
}

/// Writes `<stem>.json` and `<stem>.bin` or `<stem>.csv`; returns the header path.
pub fn write_field(field: &LevelSetField, stem: &Path, encoding: FieldEncoding) -> Result<PathBuf> {
    let data_path = stem.with_extension(match encoding {
        FieldEncoding::F64Le => "bin",
        FieldEncoding::Csv => "csv",
    });
    let header_path = stem.with_extension("json");
    let lat = &field.lattice;
    let header = FieldHeader {
        nx: lat.nx,
        ny: lat.ny,
        dx: lat.dx,
        origin: lat.origin,
        time: field.time,
        encoding,
        data: data_path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Format(format!("bad field path {}", stem.display())))?
            .to_string(),
    };
    let mut out = std::io::BufWriter::new(fs::File::create(&data_path)?);
    match encoding {
        FieldEncoding::F64Le => {
            for v in &field.values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        FieldEncoding::Csv => {
            for row in field.values.chunks(lat.nx) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
    }
    out.flush()?;
    fs::write(&header_path, serde_json::to_string_pretty(&header)?)?;
    Ok(header_path)
}

pub fn read_field(header_path: &Path) -> Result<LevelSetField> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    let data_path = header_path.with_file_name(&header.data);
    let values: Vec<f64> = match header.encoding {
        FieldEncoding::F64Le => {
            let bytes = fs::read(&data_path)?;
            if bytes.len() % 8 != 0 {
                return Err(Error::Format("binary field length is not a multiple of 8".into()));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect()
        }
        FieldEncoding::Csv => fs::read_to_string(&data_path)?
            .lines()
            .flat_map(|l| l.split(','))
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("field value `{s}`: {e}")))
            })
            .collect::<Result<_>>()?,
    };
    let lattice = Lattice {
        nx: header.nx,
        ny: header.ny,
        dx: header.dx,
        origin: header.origin,
    };
    LevelSetField::new(lattice, values, header.time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{circle_ode_oracle, TimeFunction};
    use crate::geometry::{area, hausdorff_distance, radial_distance};
    use std::f64::consts::PI;

    fn law() -> ForcingLaw {
        ForcingLaw::new(1.0, 1.0, 2).unwrap()
    }

    fn fixed(eta: f64) -> ForcingMode {
        ForcingMode::Fixed {
            eta: TimeFunction::Constant(eta),
        }
    }

    #[test]
    fn disk_signed_distance() {
        let d = StarShape::disk(Vec2::zeros(), 1.0, 256).unwrap();
        let f = init_from_shape(&d, &GridSpec::new(0.05, 2.0)).unwrap();
        let lat = f.lattice();
        let dx2 = lat.dx * lat.dx;
        let near = |x: f64, y: f64| {
            let i = ((x - lat.origin[0]) / lat.dx).round() as usize;
            let j = ((y - lat.origin[1]) / lat.dx).round() as usize;
            (lat.node(i, j), f.at(i, j))
        };
        let (p, v) = near(0.0, 0.0);
        assert!(p.norm() < 1e-12 && (v - 1.0).abs() < dx2);
        let (p, v) = near(1.5, 0.0);
        assert!((p - Vec2::new(1.5, 0.0)).norm() < 1e-12 && (v + 0.5).abs() < dx2);
    }

    #[test]
    fn grid_too_small_is_rejected() {
        let d = StarShape::disk(Vec2::zeros(), 1.0, 64).unwrap();
        assert!(matches!(
            init_from_shape(&d, &GridSpec::new(0.05, 1.2)),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn positive_area_of_disk() {
        let d = StarShape::disk(Vec2::zeros(), 0.5, 256).unwrap();
        let f = init_from_shape(&d, &GridSpec::new(1.0 / 64.0, 0.7)).unwrap();
        assert!((f.positive_area() - area(&d)).abs() < 1e-3 * area(&d));
    }

    #[test]
    fn triangle_fraction_is_exact_for_a_half_plane() {
        // u = 1 − x − y on the unit right triangle is positive on a
        // sub-triangle of scale 1/3 when the vertices are (0,0),(3,0),(0,3)
        let f = triangle_fraction(1.0, -2.0, -2.0);
        assert!((f - 1.0 / 9.0).abs() < 1e-15);
        assert!((triangle_fraction(-1.0, 2.0, 2.0) - (1.0 - 1.0 / 9.0)).abs() < 1e-15);
        assert_eq!(triangle_fraction(1.0, 1.0, 1.0), 1.0);
        assert_eq!(triangle_fraction(-1.0, 0.0, -2.0), 0.0);
    }

    #[test]
    fn round_trip_through_the_grid() {
        let dx = 1.0 / 64.0;
        let d = StarShape::disk(Vec2::zeros(), 0.5, 128).unwrap();
        let f = init_from_shape(&d, &GridSpec::around(&d, dx, 8.0)).unwrap();
        let back = extract_shape(&f, Vec2::zeros(), 128).unwrap();
        assert!(radial_distance(&back, &d).unwrap() < dx);

        let s = StarShape::from_polar_fn(Vec2::zeros(), 256, |t| 1.0 + 0.3 * (3.0 * t).cos()).unwrap();
        let f = init_from_shape(&s, &GridSpec::around(&s, dx, 8.0)).unwrap();
        let back = extract_shape(&f, Vec2::zeros(), 256).unwrap();
        assert!(hausdorff_distance(&back, &s) < dx);
    }

    #[test]
    fn annulus_is_reported() {
        let lat = GridSpec::new(0.05, 2.0).lattice();
        let values = (0..lat.len())
            .map(|idx| {
                let r = lat.node(idx % lat.nx, idx / lat.nx).norm();
                // positive for r < 0.5 and 1 < r < 1.5
                if r < 0.5 {
                    0.5 - r
                } else {
                    -(r - 1.0) * (r - 1.5) - 0.01
                }
            })
            .collect();
        let f = LevelSetField::new(lat, values, 0.0).unwrap();
        assert!(matches!(
            extract_shape(&f, Vec2::zeros(), 64),
            Err(Error::NotStarShaped { .. })
        ));
    }

    #[test]
    fn reinit_keeps_a_distance_field() {
        let dx = 1.0 / 64.0;
        let s = StarShape::from_polar_fn(Vec2::zeros(), 256, |t| 0.5 + 0.1 * (3.0 * t).cos()).unwrap();
        let f = init_from_shape(&s, &GridSpec::around(&s, dx, 8.0)).unwrap();
        let g = reinitialize(&f);
        let a = extract_shape(&f, Vec2::zeros(), 256).unwrap();
        let b = extract_shape(&g, Vec2::zeros(), 256).unwrap();
        assert!(radial_distance(&a, &b).unwrap() < 0.01 * dx);
        assert!(radial_distance(&b, &s).unwrap() < 0.1 * dx + dx * dx);
    }

    #[test]
    fn reinit_flattens_a_steep_field() {
        let dx = 1.0 / 64.0;
        let d = StarShape::disk(Vec2::zeros(), 0.5, 256).unwrap();
        let f = init_from_shape(&d, &GridSpec::around(&d, dx, 8.0)).unwrap();
        let steep = LevelSetField::new(*f.lattice(), f.values().iter().map(|v| 10.0 * v).collect(), 0.0).unwrap();
        let g = reinitialize(&steep);
        let lat = g.lattice();
        for j in 1..lat.ny - 1 {
            for i in 1..lat.nx - 1 {
                if g.at(i, j).abs() < 2.0 * dx {
                    assert!((g.gradient_norm(i, j) - 1.0).abs() < 0.05);
                }
            }
        }
        let a = extract_shape(&steep, Vec2::zeros(), 128).unwrap();
        let b = extract_shape(&g, Vec2::zeros(), 128).unwrap();
        assert!(radial_distance(&a, &b).unwrap() < 0.1 * dx);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let d = StarShape::disk(Vec2::zeros(), 0.5, 64).unwrap();
        let f = init_from_shape(&d, &GridSpec::new(0.05, 1.0)).unwrap();
        let bound = max_dt(&f, &law(), &ForcingMode::Normalized).unwrap();
        assert!(matches!(
            step_grid(&f, 1.01 * bound, &law(), &ForcingMode::Normalized),
            Err(Error::CflViolation { .. })
        ));
        assert!(step_grid(&f, bound, &law(), &ForcingMode::Normalized).is_ok());
    }

    #[test]
    fn huge_floor_matches_unfloored_bitwise() {
        let s = StarShape::cosine_perturbation(0.4, 0.1, 3, 128).unwrap();
        let f = init_from_shape(&s, &GridSpec::around(&s, 1.0 / 32.0, 8.0)).unwrap();
        let dt = max_dt(&f, &law(), &ForcingMode::Normalized).unwrap();
        let a = step_grid(&f, dt, &law(), &ForcingMode::Normalized).unwrap();
        let b = step_grid(&f, dt, &law(), &ForcingMode::Floored { floor: 1e12, eta: None }).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn floor_limits_the_shrinking_speed() {
        // a small disk under η = 0 shrinks at 1/R = 10 unless floored at 2
        let d = StarShape::disk(Vec2::zeros(), 0.1, 128).unwrap();
        let dx = 1.0 / 128.0;
        let mut config = LevelSetConfig::new(
            ForcingMode::Floored {
                floor: 2.0,
                eta: Some(TimeFunction::Constant(0.0)),
            },
            0.01,
        );
        config.snapshot_stride = 1_000_000;
        let traj = evolve_grid(&d, &GridSpec::around(&d, dx, 8.0), &config, &law()).unwrap();
        let r = traj.last().unwrap().shape.radii().iter().sum::<f64>() / 128.0;
        assert!((r - (0.1 - 2.0 * 0.01)).abs() < 2.0 * dx, "r = {r}");
    }

    #[test]
    fn pure_curvature_shrinks_a_disk() {
        let dx = 1.0 / 128.0;
        let d = StarShape::disk(Vec2::zeros(), 0.5, 128).unwrap();
        let mut config = LevelSetConfig::new(fixed(0.0), 0.02);
        config.snapshot_stride = 1_000_000;
        let traj = evolve_grid(&d, &GridSpec::around(&d, dx, 8.0), &config, &law()).unwrap();
        let r = traj.last().unwrap().shape.radii().iter().sum::<f64>() / 128.0;
        assert!((r - (0.25f64 - 2.0 * 0.02).sqrt()).abs() < 2.0 * dx, "r = {r}");
    }

    /// Volume rate of a stationary disk over `[t1, t2]`, after the relaxation
    /// onto the discrete equilibrium.
    pub(crate) fn stationary_volume_rate(cells_per_diameter: f64, t1: f64, t2: f64) -> f64 {
        let r = 1.0 / PI;
        let dx = 2.0 * r / cells_per_diameter;
        let d = StarShape::disk(Vec2::zeros(), r, 256).unwrap();
        let mut f = init_from_shape(&d, &GridSpec::around(&d, dx, 8.0)).unwrap();
        let mode = ForcingMode::Normalized;
        let mut v1 = None;
        let mut k = 0;
        while f.time() < t2 {
            if v1.is_none() && f.time() >= t1 {
                v1 = Some((f.time(), f.positive_area()));
            }
            let dt = max_dt(&f, &law(), &mode).unwrap();
            f = step_grid(&f, dt, &law(), &mode).unwrap();
            k += 1;
            if k % 50 == 0 {
                f = reinitialize(&f);
            }
        }
        let (ta, va) = v1.unwrap();
        (f.positive_area() - va) / (f.time() - ta)
    }

    #[test]
    fn stationary_disk_keeps_its_volume() {
        let rate = stationary_volume_rate(64.0, 0.4, 0.6);
        assert!(rate.abs() < 1e-3 / PI, "volume rate {rate}");
    }

    #[test]
    fn disk_follows_the_radial_ode() {
        let dx = 1.0 / 32.0;
        let d = StarShape::disk(Vec2::zeros(), 0.5, 128).unwrap();
        let mut config = LevelSetConfig::new(ForcingMode::Normalized, 0.3);
        config.checkpoints = vec![0.1];
        let traj = evolve_grid(&d, &GridSpec::around(&d, dx, 8.0), &config, &law()).unwrap();
        let oracle = circle_ode_oracle(0.5, &law(), &ForcingMode::Normalized, &[0.1, 0.3]).unwrap();
        for (t, want) in [0.1, 0.3].iter().zip(oracle) {
            let s = &traj.nearest(*t).unwrap().shape;
            let r = s.radii().iter().sum::<f64>() / s.n_theta() as f64;
            assert!((r - want).abs() < 2.0 * dx, "t {t}: {r} vs {want}");
        }
    }

    #[test]
    fn field_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = StarShape::disk(Vec2::zeros(), 0.5, 64).unwrap();
        let f = init_from_shape(&d, &GridSpec::new(0.05, 1.0)).unwrap();
        for enc in [FieldEncoding::F64Le, FieldEncoding::Csv] {
            let header = write_field(&f, &dir.path().join(format!("{enc:?}")), enc).unwrap();
            assert_eq!(read_field(&header).unwrap(), f);
        }
    }
}
