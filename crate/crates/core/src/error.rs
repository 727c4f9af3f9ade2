use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("trajectory leaves the room at t = {time} s (position ({x:.4}, {y:.4}) m)")]
    TrajectoryExitsRoom { time: f64, x: f64, y: f64 },

    #[error("covariance matrix is singular even with diagonal jitter {jitter:e}")]
    SingularCovariance { jitter: f64 },

    #[error("requested reliability {requested:e} is not reachable: misprediction plateaus at {plateau:e}")]
    UnreachableReliability { requested: f64, plateau: f64 },

    #[error("phase-refresh dynamics have no analytic outage form; use the Monte Carlo oracle")]
    AnalyticUnsupported,

    #[error("malformed scenario: {0}")]
    Scenario(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(name, reason()))
    }
}
