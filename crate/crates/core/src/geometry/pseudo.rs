use super::{diameter, StarShape, Vec2, DENSE_FACTOR};
use crate::error::{Error, Result};
use crate::raster::{nearest_point_transform, Lattice};

#[derive(Debug, Clone, Copy)]
pub struct PseudoDistanceOptions {
    /// Raster cell size; `None` means the larger diameter over 512.
    pub cell: Option<f64>,
    pub max_cells: usize,
}

impl Default for PseudoDistanceOptions {
    fn default() -> Self {
        Self {
            cell: None,
            max_cells: 1 << 26,
        }
    }
}

fn nearest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return a;
    }
    a + ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) * ab
}

/// `d̃(E, F) = (∫_{E△F} d(x, ∂E) dx)^{1/2}` on a raster.
///
/// Both sets are sampled at cell centers; distances to `∂E` come from exact
/// nearest points on the boundary for cells adjacent to it, propagated to the
/// rest of the raster. The first argument supplies the boundary.
pub fn pseudo_distance(e: &StarShape, f: &StarShape, opts: PseudoDistanceOptions) -> Result<f64> {
    let cell = opts
        .cell
        .unwrap_or_else(|| diameter(e).max(diameter(f)) / 512.0);
    if !(cell > 0.0) {
        return Err(Error::param("cell", "must be positive"));
    }
    let pe = e.dense_boundary(DENSE_FACTOR);
    let pf = f.dense_boundary(DENSE_FACTOR);
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for p in pe.iter().chain(&pf) {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let nx = ((hi.x - lo.x) / cell).ceil() as usize + 5;
    let ny = ((hi.y - lo.y) / cell).ceil() as usize + 5;
    let cells = nx.saturating_mul(ny);
    if cells > opts.max_cells {
        return Err(Error::RasterTooLarge {
            cells,
            budget: opts.max_cells,
        });
    }
    let lat = Lattice {
        nx,
        ny,
        dx: cell,
        origin: [lo.x - 2.0 * cell, lo.y - 2.0 * cell],
    };

    let mut in_e = vec![false; lat.len()];
    let mut in_f = vec![false; lat.len()];
    for j in 0..ny {
        for i in 0..nx {
            let x = lat.node(i, j);
            let idx = lat.index(i, j);
            in_e[idx] = e.radial_margin(x) > 0.0;
            in_f[idx] = f.radial_margin(x) > 0.0;
        }
    }

    let m = pe.len();
    let dtheta = std::f64::consts::TAU / m as f64;
    let r_min = e.radii().iter().cloned().fold(f64::INFINITY, f64::min);
    let window = ((4.0 * cell / (r_min * dtheta)).ceil() as isize + 2).min(m as isize / 2);
    let mut seeds = vec![None; lat.len()];
    for j in 0..ny {
        for i in 0..nx {
            let idx = lat.index(i, j);
            let straddles = [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)].iter().any(|&(di, dj)| {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                ni >= 0
                    && nj >= 0
                    && (ni as usize) < nx
                    && (nj as usize) < ny
                    && in_e[lat.index(ni as usize, nj as usize)] != in_e[idx]
            });
            if !straddles {
                continue;
            }
            let x = lat.node(i, j);
            let d = x - e.center();
            let k0 = (d.y.atan2(d.x).rem_euclid(std::f64::consts::TAU) / dtheta).round() as isize;
            let mut best = (f64::INFINITY, x);
            for w in -window..=window {
                let a = pe[(k0 + w).rem_euclid(m as isize) as usize];
                let b = pe[(k0 + w + 1).rem_euclid(m as isize) as usize];
                let q = nearest_on_segment(x, a, b);
                let dd = (q - x).norm_squared();
                if dd < best.0 {
                    best = (dd, q);
                }
            }
            seeds[idx] = Some(best.1);
        }
    }
    let dist = nearest_point_transform(&lat, &seeds);
    let integral: f64 = (0..lat.len())
        .filter(|&idx| in_e[idx] != in_f[idx])
        .map(|idx| dist[idx])
        .sum::<f64>()
        * cell
        * cell;
    Ok(integral.sqrt())
}

/// One angular sample of the polar pseudo-distance integrand.
///
/// With the boundary of the first set at radius `r` (slope norm `q`) and the
/// second set at radius `other`, the radial segment between them contributes
/// `(r/q)·(r·δ²/2 − δ³/3)` per unit angle, `δ = r − other`: the distance to
/// the boundary is taken to first order along its normal.
#[inline]
pub(crate) fn polar_pseudo_term(r: f64, q: f64, other: f64) -> f64 {
    let d = r - other;
    (r / q) * (0.5 * r * d * d - d * d * d / 3.0)
}

/// Squared pseudo-distance between two polar graphs that share a center and an
/// angular grid, integrated along rays; the boundary of `first` supplies the
/// distance.
pub fn polar_pseudo_distance_sq(first: &StarShape, second: &StarShape) -> Result<f64> {
    if first.n_theta() != second.n_theta() || first.center() != second.center() {
        return Err(Error::param(
            "second",
            "polar pseudo-distance needs a shared center and angular grid",
        ));
    }
    let total: f64 = (0..first.n_theta())
        .map(|k| {
            let r = first.radii()[k];
            polar_pseudo_term(r, r.hypot(first.dr(k)), second.radii()[k])
        })
        .sum();
    Ok(total * first.dtheta())
}

pub fn polar_pseudo_distance(first: &StarShape, second: &StarShape) -> Result<f64> {
    polar_pseudo_distance_sq(first, second).map(f64::sqrt)
}
