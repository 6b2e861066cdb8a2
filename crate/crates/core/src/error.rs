use thiserror::Error;

/// Errors raised by the geometry, flow and diagnostics layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of domain: got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("curvature vector outside the admissible cone at node {node:?}")]
    ConeViolation { node: Option<usize> },

    #[error("non-finite value in {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },

    #[error("speed function not positive at node {node}")]
    SpeedDegenerate { node: usize },

    #[error("time step underflow at t = {t}: dt = {dt}")]
    Stiffness { t: f64, dt: f64 },

    #[error("t = {t} is at or beyond the sphere blow-up time T* = {t_star}")]
    BeyondBlowup { t: f64, t_star: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("derivative backends disagree for {what}: exact {exact}, finite-difference {numeric}")]
    Inconsistent { what: String, exact: f64, numeric: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
