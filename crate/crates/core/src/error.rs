use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point ({x}, {y}) lies outside the set")]
    PointOutside { x: f64, y: f64 },

    #[error("forcing undefined at non-positive volume {0}")]
    NonPositiveVolume(f64),

    #[error("raster of {cells} cells exceeds the budget of {budget}")]
    RasterTooLarge { cells: usize, budget: usize },

    #[error("offset by {0} empties the set or breaks star-shapedness about its center")]
    OffsetDegenerate(f64),

    #[error("time step {dt:e} violates the stability bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("radius collapsed at t = {t}")]
    BlowDown { t: f64 },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("positive set is empty")]
    EmptyPositiveSet,

    #[error("ray at angle {angle:.6} crosses the zero level {crossings} times")]
    NotStarShaped { angle: f64, crossings: usize },

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("{engine} engine failed: {source}")]
    Engine {
        engine: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_engine(self, engine: &'static str) -> Self {
        Error::Engine {
            engine,
            source: Box::new(self),
        }
    }
}
