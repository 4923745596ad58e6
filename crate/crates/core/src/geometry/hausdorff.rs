use super::{StarShape, Vec2, DENSE_FACTOR};

#[inline]
fn segment_distance_sq(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + t * ab - p).norm_squared()
}

/// Distance from `p` to the closed polyline through `pts`.
pub fn point_polyline_distance(p: Vec2, pts: &[Vec2]) -> f64 {
    let n = pts.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        best = best.min(segment_distance_sq(p, pts[i], pts[(i + 1) % n]));
    }
    best.sqrt()
}

fn directed<F: Fn(Vec2) -> bool>(from: &[Vec2], to: &[Vec2], skip: F) -> f64 {
    from.iter()
        .filter(|p| !skip(**p))
        .map(|p| point_polyline_distance(*p, to))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between the boundary curves.
pub fn boundary_hausdorff_distance(a: &StarShape, b: &StarShape) -> f64 {
    let pa = a.dense_boundary(DENSE_FACTOR);
    let pb = b.dense_boundary(DENSE_FACTOR);
    directed(&pa, &pb, |_| false).max(directed(&pb, &pa, |_| false))
}

/// Hausdorff distance between the closed sets `Ā` and `B̄`.
///
/// For sets star-shaped about a common point the supremum of `d(·, B̄)` over
/// `Ā` is attained on `∂A`, so only boundary samples lying outside the other
/// set contribute.
pub fn hausdorff_distance(a: &StarShape, b: &StarShape) -> f64 {
    let pa = a.dense_boundary(DENSE_FACTOR);
    let pb = b.dense_boundary(DENSE_FACTOR);
    let ab = directed(&pa, &pb, |p| b.radial_margin(p) >= 0.0);
    let ba = directed(&pb, &pa, |p| a.radial_margin(p) >= 0.0);
    ab.max(ba)
}

/// `max_k |r_A(θ_k) − r_B(θ_k)|` for graphs over a common center and angular
/// grid; `None` otherwise. This bounds the Hausdorff distance from above.
pub fn radial_distance(a: &StarShape, b: &StarShape) -> Option<f64> {
    if a.center() != b.center() || a.n_theta() != b.n_theta() {
        return None;
    }
    Some(
        a.radii()
            .iter()
            .zip(b.radii())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force over two dense point clouds filling the closed sets.
    fn point_cloud_hausdorff(a: &StarShape, b: &StarShape) -> f64 {
        let cloud = |s: &StarShape| {
            let mut pts = Vec::new();
            for j in 0..720 {
                let t = std::f64::consts::TAU * j as f64 / 720.0;
                let r = s.radius_at(t);
                for i in 0..=40 {
                    let rho = r * i as f64 / 40.0;
                    pts.push(s.center() + rho * Vec2::new(t.cos(), t.sin()));
                }
            }
            pts
        };
        let (ca, cb) = (cloud(a), cloud(b));
        let dir = |x: &[Vec2], y: &[Vec2]| {
            x.iter()
                .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        dir(&ca, &cb).max(dir(&cb, &ca))
    }

    #[test]
    fn identical_and_concentric() {
        let a = StarShape::cosine_perturbation(1.0, 0.2, 3, 128).unwrap();
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
        assert!(boundary_hausdorff_distance(&a, &a) < 1e-12);
        let d1 = StarShape::disk(Vec2::zeros(), 1.0, 256).unwrap();
        let d2 = StarShape::disk(Vec2::zeros(), 2.0, 256).unwrap();
        assert!((hausdorff_distance(&d1, &d2) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn shifted_disk_matches_point_cloud_oracle() {
        let a = StarShape::disk(Vec2::zeros(), 1.0, 128).unwrap();
        let b = StarShape::disk(Vec2::new(0.1, 0.0), 1.0, 128).unwrap();
        let oracle = point_cloud_hausdorff(&a, &b);
        assert!((oracle - 0.1).abs() < 2e-3);
        assert!((hausdorff_distance(&a, &b) - 0.1).abs() < 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn symmetric_and_bounded_by_radial_gap(
            amp in 0.0f64..0.2, mode in 2u32..6, scale in 0.8f64..1.2
        ) {
            let a = StarShape::cosine_perturbation(1.0, amp, mode, 64).unwrap();
            let b = StarShape::disk(Vec2::zeros(), scale, 64).unwrap();
            let d = hausdorff_distance(&a, &b);
            prop_assert!((d - hausdorff_distance(&b, &a)).abs() < 1e-12);
            let gap = a.radii().iter().map(|r| (r - scale).abs()).fold(0.0, f64::max);
            prop_assert!(d <= gap + 1e-3);
        }
    }
}
