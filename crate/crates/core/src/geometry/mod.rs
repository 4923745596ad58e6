//! Polar-graph representation of bounded star-shaped planar sets and the
//! geometric predicates and metrics defined on them.
//!
//! A [`StarShape`] stores a center `c` and `N` radii sampled at the uniform
//! angles `θ_k = 2πk/N`. The represented open set is
//! `{c + t·r(θ)·(cos θ, sin θ) : 0 ≤ t < 1}`. Between samples the radial
//! function is evaluated with periodic Catmull-Rom interpolation.

mod hausdorff;
mod metrics;
mod morphology;
mod pseudo;
mod reflection;

pub use hausdorff::{
    boundary_hausdorff_distance, hausdorff_distance, point_polyline_distance, radial_distance,
};
pub use metrics::{
    area, curvature_at, diameter, inner_outer_radius, outward_normal_at, perimeter, star_radius,
};
pub(crate) use metrics::polar_curvature;
pub use morphology::{offset, scale_about_origin};
pub use pseudo::{
    polar_pseudo_distance, polar_pseudo_distance_sq, pseudo_distance, PseudoDistanceOptions,
};
pub use reflection::{
    annulus_and_derived_radius, rho_reflection_check, AnnulusBound, GeometryReport, HalfSpace,
    ReflectionOptions, ReflectionVerdict,
};

use std::f64::consts::TAU;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Upsampling factor used when a boundary must be treated as a dense point set.
pub const DENSE_FACTOR: usize = 4;

const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct StarShape {
    center: Vec2,
    radii: Vec<f64>,
}

impl StarShape {
    pub fn new(center: Vec2, radii: Vec<f64>) -> Result<Self> {
        if radii.len() < MIN_SAMPLES {
            return Err(Error::InvalidShape(format!(
                "need at least {MIN_SAMPLES} radial samples, got {}",
                radii.len()
            )));
        }
        if let Some((k, r)) = radii
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::InvalidShape(format!("radius {k} is {r}")));
        }
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::InvalidShape("center is not finite".into()));
        }
        Ok(Self { center, radii })
    }

    pub fn disk(center: Vec2, radius: f64, n_theta: usize) -> Result<Self> {
        Self::new(center, vec![radius; n_theta])
    }

    /// Samples `r(θ)` on the uniform angular grid.
    pub fn from_polar_fn(center: Vec2, n_theta: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dt = TAU / n_theta as f64;
        Self::new(center, (0..n_theta).map(|k| f(k as f64 * dt)).collect())
    }

    /// `r(θ) = base·(1 + amplitude·cos(mode·θ))` about the origin.
    pub fn cosine_perturbation(
        base: f64,
        amplitude: f64,
        mode: u32,
        n_theta: usize,
    ) -> Result<Self> {
        let m = mode as f64;
        Self::from_polar_fn(Vec2::zeros(), n_theta, |t| {
            base * (1.0 + amplitude * (m * t).cos())
        })
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn n_theta(&self) -> usize {
        self.radii.len()
    }

    pub fn dtheta(&self) -> f64 {
        TAU / self.radii.len() as f64
    }

    pub fn angle(&self, k: usize) -> f64 {
        k as f64 * self.dtheta()
    }

    /// Radius at a periodic index.
    #[inline]
    pub fn r(&self, k: isize) -> f64 {
        let n = self.radii.len() as isize;
        self.radii[k.rem_euclid(n) as usize]
    }

    /// Seven-point central difference for `dr/dθ` at sample `k`.
    pub fn dr(&self, k: usize) -> f64 {
        let k = k as isize;
        SLOPE_STENCIL
            .iter()
            .map(|&(o, w)| w * self.r(k + o))
            .sum::<f64>()
            / self.dtheta()
    }

    /// Five-point central difference for `d²r/dθ²` at sample `k`.
    pub fn d2r(&self, k: usize) -> f64 {
        let k = k as isize;
        let h = self.dtheta();
        (-self.r(k - 2) + 16.0 * self.r(k - 1) - 30.0 * self.r(k) + 16.0 * self.r(k + 1)
            - self.r(k + 2))
            / (12.0 * h * h)
    }

    /// Fourth-order staggered values `(r, dr/dθ)` at `θ_k + Δθ/2`.
    pub fn midpoint(&self, k: usize) -> (f64, f64) {
        let k = k as isize;
        let (mut m, mut d) = (0.0, 0.0);
        for (&(o, wm), &(_, wd)) in MID_STENCIL.iter().zip(&STAGGERED_SLOPE_STENCIL) {
            let r = self.r(k + o);
            m += wm * r;
            d += wd * r;
        }
        (m, d / self.dtheta())
    }

    /// Three-point `d²r/dθ²`; its spectrum keeps explicit diffusion steps stable.
    pub fn d2r_compact(&self, k: usize) -> f64 {
        let k = k as isize;
        let h = self.dtheta();
        (self.r(k + 1) - 2.0 * self.r(k) + self.r(k - 1)) / (h * h)
    }

    pub fn boundary_point(&self, k: usize) -> Vec2 {
        let t = self.angle(k);
        self.center + self.radii[k] * Vec2::new(t.cos(), t.sin())
    }

    pub fn boundary_points(&self) -> Vec<Vec2> {
        (0..self.n_theta()).map(|k| self.boundary_point(k)).collect()
    }

    /// Radial function at an arbitrary angle (periodic Catmull-Rom).
    pub fn radius_at(&self, theta: f64) -> f64 {
        let u = theta.rem_euclid(TAU) / self.dtheta();
        let i = u.floor() as isize;
        let s = u - i as f64;
        let (p0, p1, p2, p3) = (self.r(i - 1), self.r(i), self.r(i + 1), self.r(i + 2));
        let s2 = s * s;
        let s3 = s2 * s;
        0.5 * (2.0 * p1
            + (p2 - p0) * s
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s2
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * s3)
    }

    /// Boundary resampled at `factor·N` uniform angles through the interpolant.
    pub fn dense_boundary(&self, factor: usize) -> Vec<Vec2> {
        let m = self.n_theta() * factor.max(1);
        let dt = TAU / m as f64;
        (0..m)
            .map(|j| {
                let t = j as f64 * dt;
                self.center + self.radius_at(t) * Vec2::new(t.cos(), t.sin())
            })
            .collect()
    }

    /// `r(θ_p) − |p − c|`: positive inside, zero on the boundary.
    pub fn radial_margin(&self, p: Vec2) -> f64 {
        let d = p - self.center;
        let rho = d.norm();
        if rho == 0.0 {
            return self.radii.iter().cloned().fold(f64::INFINITY, f64::min);
        }
        self.radius_at(d.y.atan2(d.x)) - rho
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.radial_margin(p) > 0.0
    }

    /// Same radii, new center.
    pub fn translated(&self, by: Vec2) -> Self {
        Self {
            center: self.center + by,
            radii: self.radii.clone(),
        }
    }

    pub fn with_radii(&self, radii: Vec<f64>) -> Result<Self> {
        Self::new(self.center, radii)
    }

    /// Re-expresses the set as a polar graph about `new_center` with `n_theta`
    /// samples. Fails if some ray from `new_center` leaves the set more than once.
    pub fn recentered(&self, new_center: Vec2, n_theta: usize) -> Result<Self> {
        if !self.contains(new_center) {
            return Err(Error::PointOutside {
                x: new_center.x,
                y: new_center.y,
            });
        }
        let reach = self.radii.iter().cloned().fold(0.0, f64::max)
            + (new_center - self.center).norm();
        let dt = TAU / n_theta as f64;
        let steps = 256;
        let mut radii = Vec::with_capacity(n_theta);
        for k in 0..n_theta {
            let u = Vec2::new((k as f64 * dt).cos(), (k as f64 * dt).sin());
            let f = |t: f64| self.radial_margin(new_center + t * u);
            let mut crossing = None;
            let mut prev = f(0.0);
            for j in 1..=steps {
                let t = reach * 1.05 * j as f64 / steps as f64;
                let cur = f(t);
                if prev > 0.0 && cur <= 0.0 {
                    if crossing.is_some() {
                        return Err(Error::InvalidShape(format!(
                            "not star-shaped about ({}, {})",
                            new_center.x, new_center.y
                        )));
                    }
                    let (mut lo, mut hi) = (reach * 1.05 * (j - 1) as f64 / steps as f64, t);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if f(mid) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    crossing = Some(0.5 * (lo + hi));
                } else if prev <= 0.0 && cur > 0.0 {
                    return Err(Error::InvalidShape(format!(
                        "not star-shaped about ({}, {})",
                        new_center.x, new_center.y
                    )));
                }
                prev = cur;
            }
            radii.push(crossing.ok_or_else(|| Error::InvalidShape("ray without crossing".into()))?);
        }
        Self::new(new_center, radii)
    }
}

/// Fourth-order interpolation from samples `k−1 … k+2` to `θ_k + Δθ/2`.
pub(crate) const MID_STENCIL: [(isize, f64); 4] = [
    (-1, -1.0 / 16.0),
    (0, 9.0 / 16.0),
    (1, 9.0 / 16.0),
    (2, -1.0 / 16.0),
];

/// Fourth-order staggered slope at `θ_k + Δθ/2`, in units of `1/Δθ`.
pub(crate) const STAGGERED_SLOPE_STENCIL: [(isize, f64); 4] = [
    (-1, 1.0 / 24.0),
    (0, -27.0 / 24.0),
    (1, 27.0 / 24.0),
    (2, -1.0 / 24.0),
];

/// Offsets and weights of the sixth-order slope stencil, in units of `1/Δθ`.
pub(crate) const SLOPE_STENCIL: [(isize, f64); 6] = [
    (-3, -1.0 / 60.0),
    (-2, 9.0 / 60.0),
    (-1, -45.0 / 60.0),
    (1, 45.0 / 60.0),
    (2, -9.0 / 60.0),
    (3, 1.0 / 60.0),
];

#[derive(Serialize, Deserialize)]
struct ShapeFile {
    center: [f64; 2],
    radii: Vec<f64>,
    n_theta: usize,
}

impl Serialize for StarShape {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ShapeFile {
            center: [self.center.x, self.center.y],
            radii: self.radii.clone(),
            n_theta: self.radii.len(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StarShape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = ShapeFile::deserialize(d)?;
        if f.n_theta != f.radii.len() {
            return Err(serde::de::Error::custom(format!(
                "n_theta = {} but {} radii given",
                f.n_theta,
                f.radii.len()
            )));
        }
        StarShape::new(Vec2::new(f.center[0], f.center[1]), f.radii)
            .map_err(serde::de::Error::custom)
    }
}
