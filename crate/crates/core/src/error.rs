use thiserror::Error;

/// Errors raised by the geometry, solver and period routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("the Daniel-Hauswirth chart requires kappa = 0 (got kappa = {kappa})")]
    ChartMismatch { kappa: f64 },

    #[error("point ({x}, {y}) lies outside the conformal chart for kappa = {kappa}")]
    OutsideChart { x: f64, y: f64, kappa: f64 },

    #[error("base loop is not a valid closed curve: {0}")]
    InvalidLoop(String),

    #[error("base loop self-intersects between segments {first} and {second}")]
    SelfIntersectingLoop { first: usize, second: usize },

    #[error("no sign change of {what} on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoBracket {
        what: String,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("root finder for {what} did not converge after {iterations} iterations")]
    RootNotConverged { what: String, iterations: usize },

    #[error("Newton iteration stagnated after {iterations} iterations (residual {residual:.3e})")]
    NewtonStagnation { iterations: usize, residual: f64 },

    #[error("singular linearization: {0}")]
    SingularJacobian(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("fields live on different domains or parameters: {0}")]
    DomainMismatch(String),

    #[error("edge {0} is not an edge of the domain polygon")]
    EdgeNotFound(usize),

    #[error("vertex {0} is not a designated vertical-edge vertex")]
    NoVerticalEdge(usize),

    #[error("level set u = {height} does not reach the corner: {reason}")]
    LevelSetMissesCorner { height: f64, reason: String },

    #[error("twist profile is invalid: {0}")]
    InvalidProfile(String),

    #[error("boundary does not close up (gap {gap:.3e})")]
    NonClosingBoundary { gap: f64 },

    #[error("geodesics coincide")]
    CoincidentGeodesics,

    #[error("mirror geodesics do not intersect at b = {b} (threshold b0(phi) = {b0})")]
    NoIntersection { b: f64, b0: f64 },

    #[error("{what} is not monotone near {at}")]
    NotMonotone { what: String, at: f64 },

    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("non-symmetric shape operator (asymmetry {0:.3e})")]
    NonSymmetric(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
