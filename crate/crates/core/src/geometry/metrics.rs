use super::{StarShape, Vec2, DENSE_FACTOR};
use crate::error::{Error, Result};

/// `∮ √(r² + r′²) dθ` by the periodic midpoint rule, with `r` and `r′`
/// taken at half-steps by fourth-order staggered stencils. Unlike collocated
/// central differences these see the alternating mode `(−1)^k`.
pub fn perimeter(shape: &StarShape) -> f64 {
    let h = shape.dtheta();
    (0..shape.n_theta())
        .map(|k| {
            let (m, d) = shape.midpoint(k);
            m.hypot(d)
        })
        .sum::<f64>()
        * h
}

/// `½∮ r² dθ` by the trapezoidal rule.
pub fn area(shape: &StarShape) -> f64 {
    0.5 * shape.dtheta() * shape.radii().iter().map(|r| r * r).sum::<f64>()
}

/// Signed curvature at sample `k`, positive for convex arcs.
pub fn curvature_at(shape: &StarShape, k: usize) -> f64 {
    let r = shape.radii()[k];
    let d1 = shape.dr(k);
    let d2 = shape.d2r(k);
    polar_curvature(r, d1, d2)
}

#[inline]
pub(crate) fn polar_curvature(r: f64, d1: f64, d2: f64) -> f64 {
    let q2 = r * r + d1 * d1;
    (r * r + 2.0 * d1 * d1 - r * d2) / (q2 * q2.sqrt())
}

/// Outward unit normal `(r·x̂ − r′·θ̂)/√(r² + r′²)` at sample `k`.
pub fn outward_normal_at(shape: &StarShape, k: usize) -> Vec2 {
    let t = shape.angle(k);
    let r = shape.radii()[k];
    let d1 = shape.dr(k);
    let radial = Vec2::new(t.cos(), t.sin());
    let tangential = Vec2::new(-t.sin(), t.cos());
    (r * radial - d1 * tangential) / r.hypot(d1)
}

/// Largest `r` for which `(x − about)·ν_x ≥ r` on every boundary sample.
pub fn star_radius(shape: &StarShape, about: Vec2) -> Result<f64> {
    if !shape.contains(about) {
        return Err(Error::PointOutside {
            x: about.x,
            y: about.y,
        });
    }
    Ok((0..shape.n_theta())
        .map(|k| (shape.boundary_point(k) - about).dot(&outward_normal_at(shape, k)))
        .fold(f64::INFINITY, f64::min))
}

/// `(inf |x − about|, sup |x − about|)` over the densely sampled boundary.
pub fn inner_outer_radius(shape: &StarShape, about: Vec2) -> (f64, f64) {
    shape
        .dense_boundary(DENSE_FACTOR)
        .iter()
        .map(|p| (p - about).norm())
        .fold((f64::INFINITY, 0.0), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

pub fn diameter(shape: &StarShape) -> f64 {
    let pts = shape.boundary_points();
    let mut best: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    best.sqrt()
}
