use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{diameter, inner_outer_radius, star_radius, StarShape, Vec2};
use crate::error::{Error, Result};

/// The line `{x : x·ν = s}` with its two open sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    normal: [f64; 2],
    offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec2, offset: f64) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::param("normal", format!("|ν| = {} is not 1", normal.norm())));
        }
        Ok(Self {
            normal: [normal.x, normal.y],
            offset,
        })
    }

    pub fn from_angle(angle: f64, offset: f64) -> Self {
        Self {
            normal: [angle.cos(), angle.sin()],
            offset,
        }
    }

    pub fn normal(&self) -> Vec2 {
        Vec2::new(self.normal[0], self.normal[1])
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `x·ν − s`: positive on the far side `H₊`.
    #[inline]
    pub fn signed(&self, p: Vec2) -> f64 {
        p.x * self.normal[0] + p.y * self.normal[1] - self.offset
    }

    /// Mirror image across the line.
    #[inline]
    pub fn reflect(&self, p: Vec2) -> Vec2 {
        p - 2.0 * self.signed(p) * self.normal()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReflectionOptions {
    pub n_directions: usize,
    pub n_offsets: usize,
    pub dense_factor: usize,
    /// Violation depth still reported as a pass; `None` means `1e-3·diameter`.
    pub tolerance: Option<f64>,
}

impl Default for ReflectionOptions {
    fn default() -> Self {
        Self {
            n_directions: 128,
            n_offsets: 64,
            dense_factor: 4,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReflectionVerdict {
    pub pass: bool,
    /// `inf |x| − ρ` over the boundary; condition (i) needs it positive.
    pub ball_clearance: f64,
    /// Smallest radial clearance of a reflected cap point; negative values are
    /// violation depths.
    pub margin: f64,
    pub worst_plane: Option<HalfSpace>,
    pub tolerance: f64,
}

/// Samples the ρ-reflection property about the origin: `B̄_ρ(0) ⊂ Ω` and, for
/// every sampled direction `ν` and offset `s ∈ (ρ, sup|x|]`, the reflection of
/// `Ω ∩ {x·ν > s}` lands inside `Ω`.
pub fn rho_reflection_check(
    shape: &StarShape,
    rho: f64,
    opts: &ReflectionOptions,
) -> Result<ReflectionVerdict> {
    if !(rho > 0.0) {
        return Err(Error::param("rho", "must be positive"));
    }
    let tolerance = opts.tolerance.unwrap_or_else(|| 1e-3 * diameter(shape));
    let pts = shape.dense_boundary(opts.dense_factor);
    let (inner, outer) = inner_outer_radius(shape, Vec2::zeros());
    let ball_clearance = if shape.contains(Vec2::zeros()) {
        inner - rho
    } else {
        -inner
    };

    let floor = 1e-9 * outer;
    let mut margin = f64::INFINITY;
    let mut worst_plane = None;
    let mut proj = vec![0.0; pts.len()];
    for j in 0..opts.n_directions {
        let angle = TAU * j as f64 / opts.n_directions as f64;
        let nu = Vec2::new(angle.cos(), angle.sin());
        for (p, x) in proj.iter_mut().zip(&pts) {
            *p = x.dot(&nu);
        }
        for i in 0..opts.n_offsets {
            let s = rho + (outer - rho) * (i + 1) as f64 / opts.n_offsets as f64;
            let plane = HalfSpace::from_angle(angle, s);
            for (x, &p) in pts.iter().zip(&proj) {
                if p - s <= floor {
                    continue;
                }
                let m = shape.radial_margin(plane.reflect(*x));
                if m < margin {
                    margin = m;
                    worst_plane = Some(plane);
                }
            }
        }
    }
    if !margin.is_finite() {
        margin = 0.0;
    }
    Ok(ReflectionVerdict {
        pass: ball_clearance > 0.0 && margin >= -tolerance,
        ball_clearance,
        margin,
        worst_plane,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnnulusBound {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub annulus_width: f64,
    /// `(inf|x|² − ρ²)^{1/2}`, the star radius a ρ-reflection set is owed.
    pub derived_star_radius: f64,
}

pub fn annulus_and_derived_radius(shape: &StarShape, rho: f64) -> Result<AnnulusBound> {
    let (inner, outer) = inner_outer_radius(shape, Vec2::zeros());
    if inner <= rho {
        return Err(Error::Hypothesis(format!(
            "inf |x| = {inner} does not exceed ρ = {rho}"
        )));
    }
    Ok(AnnulusBound {
        inner_radius: inner,
        outer_radius: outer,
        annulus_width: outer - inner,
        derived_star_radius: (inner * inner - rho * rho).sqrt(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryReport {
    pub rho_reflection: ReflectionVerdict,
    pub star_radius: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub annulus_width: f64,
}

impl GeometryReport {
    pub fn compute(shape: &StarShape, rho: f64, opts: &ReflectionOptions) -> Result<Self> {
        let rho_reflection = rho_reflection_check(shape, rho, opts)?;
        let (inner, outer) = inner_outer_radius(shape, Vec2::zeros());
        let star = star_radius(shape, Vec2::zeros()).unwrap_or(f64::NEG_INFINITY);
        Ok(Self {
            rho_reflection,
            // the sampled support value can exceed the dense inner radius by
            // the interpolation error; the report keeps star ≤ inner
            star_radius: star.min(inner),
            inner_radius: inner,
            outer_radius: outer,
            annulus_width: outer - inner,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> ReflectionOptions {
        ReflectionOptions {
            n_directions: 64,
            n_offsets: 32,
            ..Default::default()
        }
    }

    /// Brute-force reference: dense directions and offsets, every boundary
    /// sample, inside test by the polar radius.
    fn brute_force_violation(shape: &StarShape, rho: f64, nd: usize, ns: usize) -> f64 {
        let pts = shape.dense_boundary(8);
        let outer = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let mut worst = f64::INFINITY;
        for j in 0..nd {
            let a = TAU * (j as f64 + 0.37) / nd as f64;
            for i in 0..ns {
                let s = rho + (outer - rho) * (i as f64 + 0.5) / ns as f64;
                let h = HalfSpace::from_angle(a, s);
                for x in &pts {
                    if h.signed(*x) > 0.0 {
                        worst = worst.min(shape.radial_margin(h.reflect(*x)));
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn half_space_validation_and_reflection() {
        assert!(HalfSpace::new(Vec2::new(1.0, 1.0), 0.0).is_err());
        let h = HalfSpace::new(Vec2::new(0.0, 1.0), 0.5).unwrap();
        let p = h.reflect(Vec2::new(0.3, 0.9));
        assert!((p - Vec2::new(0.3, 0.1)).norm() < 1e-15);
        assert!((h.reflect(p) - Vec2::new(0.3, 0.9)).norm() < 1e-15);
    }

    #[test]
    fn centered_disk_passes() {
        let d = StarShape::disk(Vec2::zeros(), 1.0, 128).unwrap();
        let v = rho_reflection_check(&d, 0.1, &coarse()).unwrap();
        assert!(v.pass && v.margin > 0.0, "{v:?}");
        assert!(rho_reflection_check(&d, 0.0, &coarse()).is_err());
    }

    #[test]
    fn off_center_disk_fails() {
        let d = StarShape::disk(Vec2::new(0.5, 0.0), 1.0, 128).unwrap();
        let v = rho_reflection_check(&d, 0.1, &coarse()).unwrap();
        assert!(!v.pass);
        assert!(v.margin < -0.1, "{v:?}");
        assert!(brute_force_violation(&d, 0.1, 64, 32) < -0.1);
    }

    #[test]
    fn verdict_is_stable_under_refinement() {
        for amp in [0.05, 0.01, 0.005] {
            let s = StarShape::cosine_perturbation(0.318, amp, 3, 256).unwrap();
            let v = rho_reflection_check(&s, 0.01, &coarse()).unwrap();
            let tol = v.tolerance;
            let dense = brute_force_violation(&s, 0.01, 256, 128);
            assert_eq!(v.pass, dense >= -tol, "amp {amp}: {} vs {dense}", v.margin);
        }
    }

    #[test]
    fn annulus_bound_for_disk() {
        let d = StarShape::disk(Vec2::zeros(), 1.0, 128).unwrap();
        let a = annulus_and_derived_radius(&d, 0.1).unwrap();
        assert!(a.annulus_width < 1e-12);
        assert!((a.derived_star_radius - 0.99f64.sqrt()).abs() < 1e-9);
        assert!(annulus_and_derived_radius(&d, 1.5).is_err());
    }

    #[test]
    fn annulus_of_cos3_shape() {
        let s = StarShape::cosine_perturbation(0.318, 0.05, 3, 256).unwrap();
        let a = annulus_and_derived_radius(&s, 0.01).unwrap();
        assert!((a.annulus_width - 0.0318).abs() < 1e-6);
        assert!(a.annulus_width <= 0.04);
    }

    #[test]
    fn passing_shapes_obey_annulus_and_star_bounds() {
        for (amp, rho) in [(0.005, 0.01), (0.0, 0.05), (0.01, 0.012)] {
            let s = StarShape::cosine_perturbation(0.318, amp, 3, 256).unwrap();
            let report = GeometryReport::compute(&s, rho, &coarse()).unwrap();
            assert!(report.rho_reflection.pass, "amp {amp}: {report:?}");
            let a = annulus_and_derived_radius(&s, rho).unwrap();
            assert!(a.annulus_width <= 4.0 * rho + 1e-9);
            assert!(report.star_radius >= a.derived_star_radius - 1e-6);
            assert!(report.star_radius <= report.inner_radius);
        }
    }
}
