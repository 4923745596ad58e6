use std::f64::consts::TAU;

use super::{point_polyline_distance, StarShape, Vec2, DENSE_FACTOR};
use crate::error::{Error, Result};

/// Morphological offset: erosion by `a > 0` (`{x : B̄_a(x) ⊂ Ω}`), dilation by
/// `a < 0` (`Ω + B_{|a|}`).
///
/// Along every ray from the center the result boundary is located by bisection
/// on the signed distance to the densely sampled boundary; a ray that re-enters
/// the result means star-shapedness about the center was lost.
pub fn offset(shape: &StarShape, a: f64) -> Result<StarShape> {
    if a == 0.0 {
        return Ok(shape.clone());
    }
    let boundary = shape.dense_boundary(DENSE_FACTOR);
    let c = shape.center();
    let sd = |p: Vec2| {
        let d = point_polyline_distance(p, &boundary);
        if shape.radial_margin(p) > 0.0 {
            d
        } else {
            -d
        }
    };
    // the result is {sd > a}
    let r_max = shape.radii().iter().cloned().fold(0.0, f64::max);
    let reach = r_max + a.abs().max(0.0) + 1e-12;
    if sd(c) <= a {
        return Err(Error::OffsetDegenerate(a));
    }
    let n = shape.n_theta();
    let samples = 400;
    let mut radii = Vec::with_capacity(n);
    for k in 0..n {
        let t = TAU * k as f64 / n as f64;
        let u = Vec2::new(t.cos(), t.sin());
        let g = |rho: f64| sd(c + rho * u) - a;
        let step = reach / samples as f64;
        let mut exit = None;
        let mut prev = g(0.0);
        for j in 1..=samples + 1 {
            let rho = j as f64 * step;
            let cur = g(rho);
            if prev > 0.0 && cur <= 0.0 {
                if exit.is_some() {
                    return Err(Error::OffsetDegenerate(a));
                }
                let (mut lo, mut hi) = (rho - step, rho);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                exit = Some(0.5 * (lo + hi));
            } else if prev <= 0.0 && cur > 0.0 {
                return Err(Error::OffsetDegenerate(a));
            }
            prev = cur;
        }
        radii.push(exit.ok_or(Error::OffsetDegenerate(a))?);
    }
    StarShape::new(c, radii)
}

/// `x ↦ factor·x`: radii and center both scale.
pub fn scale_about_origin(shape: &StarShape, factor: f64) -> Result<StarShape> {
    if !(factor > 0.0) {
        return Err(Error::param("factor", "must be positive"));
    }
    StarShape::new(
        shape.center() * factor,
        shape.radii().iter().map(|r| r * factor).collect(),
    )
}
