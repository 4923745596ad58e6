//! Numerical engines and verifiers for the volume-normalized mean curvature
//! flow `V = −H + λ(|Ω_t|)` of star-shaped planar sets.
//!
//! Three independent engines evolve the same data:
//!
//! - [`flow`]: front tracking of the radial function `r(θ, t)`;
//! - [`levelset`]: the level-set equation on a uniform grid;
//! - [`atw`]: restricted minimizing movements of `J = Per − Λ(|E|)`.
//!
//! [`geometry`] supplies shape metrics and predicates (ρ-reflection, star
//! radius, Hausdorff and pseudo-distances), [`forcing`] the power-law
//! normalization `λ(s) = B/s^β`, and [`diagnostics`] audits recorded
//! trajectories.

pub mod atw;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod flow;
pub mod forcing;
pub mod geometry;
pub mod io;
pub mod levelset;
pub mod raster;
pub mod trajectory;

pub use error::{Error, Result};
pub use forcing::ForcingLaw;
pub use geometry::{StarShape, Vec2};
pub use trajectory::Trajectory;
