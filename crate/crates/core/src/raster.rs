//! Uniform node lattices and a two-pass nearest-point distance transform.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

/// Node `(i, j)` sits at `origin + (i·dx, j·dx)`; storage is row-major with
/// `i` fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub origin: [f64; 2],
}

impl Lattice {
    /// Square lattice covering `[-half_width, half_width]²`.
    pub fn centered(half_width: f64, dx: f64) -> Self {
        let cells = (2.0 * half_width / dx).ceil() as usize;
        let span = cells as f64 * dx;
        Self {
            nx: cells + 1,
            ny: cells + 1,
            dx,
            origin: [-0.5 * span, -0.5 * span],
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin[0] + i as f64 * self.dx,
            self.origin[1] + j as f64 * self.dx,
        )
    }

    pub fn x_max(&self) -> f64 {
        self.origin[0] + (self.nx - 1) as f64 * self.dx
    }

    pub fn y_max(&self) -> f64 {
        self.origin[1] + (self.ny - 1) as f64 * self.dx
    }
}

/// Propagates nearest seed points over the lattice with forward and backward
/// 8-neighbour sweeps and returns `|x − nearest|` per node. Nodes whose seed
/// is `Some(p)` start at distance `|x − p|`; unreachable nodes stay infinite.
pub fn nearest_point_transform(lat: &Lattice, seeds: &[Option<Vec2>]) -> Vec<f64> {
    assert_eq!(seeds.len(), lat.len());
    let mut near: Vec<Option<Vec2>> = seeds.to_vec();
    let mut dist: Vec<f64> = (0..lat.len())
        .map(|idx| match near[idx] {
            Some(p) => (lat.node(idx % lat.nx, idx / lat.nx) - p).norm(),
            None => f64::INFINITY,
        })
        .collect();

    let relax = |i: usize, j: usize, offsets: &[(isize, isize)], near: &mut Vec<Option<Vec2>>, dist: &mut Vec<f64>| {
        let idx = lat.index(i, j);
        let x = lat.node(i, j);
        for &(di, dj) in offsets {
            let (ni, nj) = (i as isize + di, j as isize + dj);
            if ni < 0 || nj < 0 || ni >= lat.nx as isize || nj >= lat.ny as isize {
                continue;
            }
            if let Some(p) = near[lat.index(ni as usize, nj as usize)] {
                let d = (x - p).norm();
                if d < dist[idx] {
                    dist[idx] = d;
                    near[idx] = Some(p);
                }
            }
        }
    };

    const FORWARD: [(isize, isize); 4] = [(-1, 0), (-1, -1), (0, -1), (1, -1)];
    const BACKWARD: [(isize, isize); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];
    for _ in 0..2 {
        for j in 0..lat.ny {
            for i in 0..lat.nx {
                relax(i, j, &FORWARD, &mut near, &mut dist);
            }
            for i in (0..lat.nx).rev() {
                relax(i, j, &[(1, 0)], &mut near, &mut dist);
            }
        }
        for j in (0..lat.ny).rev() {
            for i in (0..lat.nx).rev() {
                relax(i, j, &BACKWARD, &mut near, &mut dist);
            }
            for i in 0..lat.nx {
                relax(i, j, &[(-1, 0)], &mut near, &mut dist);
            }
        }
    }
    dist
}
