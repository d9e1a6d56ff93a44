//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("evaluation produced a non-finite value")]
    NonFiniteResult,

    #[error("point ({0}, {1}) lies outside the domain box")]
    DomainViolation(f64, f64),

    #[error("map does not fix the origin: |f(0,0)| = {0:.3e}")]
    NotAGerm(f64),

    #[error("jet order {requested} exceeds the cap of {max}")]
    OrderTooHigh { requested: usize, max: usize },

    #[error("finite differences are ill-conditioned: coefficient magnitude {0:.3e}")]
    IllConditionedJet(f64),

    #[error("exact arithmetic requested on a non-polynomial expression")]
    NonPolynomialExact,

    #[error("expression has no symbolic derivative (sqrt of a non-constant)")]
    NotSymbolicallyDifferentiable,

    #[error("series is not invertible: {0}")]
    NonInvertibleSeries(String),

    #[error("not a tangential family: {0}")]
    NotTangential(String),

    #[error("tangency check inconclusive: {0}")]
    InconclusiveTangency(String),

    #[error("support curve is not immersed at the base point")]
    SupportNotImmersed,

    #[error("family curve is vertical at the base point (projection not invertible)")]
    NonInvertibleProjection,

    #[error("metric is singular or not positive definite at ({0}, {1})")]
    SingularMetric(f64, f64),

    #[error("geodesic left the chart at ({u}, {v}) (parameter {t})")]
    ChartExit { u: f64, v: f64, t: f64 },

    #[error("geodesic energy drift {drift:.3e} exceeds the allowed {limit:.3e}")]
    EnergyDrift { drift: f64, limit: f64 },

    #[error("no criminant branch found in the requested band")]
    BranchNotFound,

    #[error("curve window too short for a contact-order fit")]
    WindowTooShort,

    #[error("contact-order fit residual {0:.3e} too large (branch not graph-like)")]
    FitResidual(f64),

    #[error("deformation parameter {0} outside the declared range")]
    LambdaOutOfRange(f64),

    #[error("grid too coarse: need at least {0} cells per axis")]
    GridTooCoarse(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
