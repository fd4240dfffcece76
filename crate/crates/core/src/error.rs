use thiserror::Error;

/// Errors raised by the algebra, the field constructors and the invariant drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("degree overflow: ({p},{q}) exceeds dimension {n}")]
    DegreeOverflow { n: usize, p: usize, q: usize },
    #[error("degree mismatch: ({0},{1}) vs ({2},{3})")]
    DegreeMismatch(usize, usize, usize, usize),
    #[error("operation needs a nonzero {side} degree")]
    DegreeZero { side: &'static str },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("invalid multi-index {0:?}")]
    InvalidIndex(Vec<usize>),
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("point at radius {r} lies outside the chart (r_min = {r_min})")]
    OutsideChart { r: f64, r_min: f64 },
    #[error("field provides derivatives up to order {available}, {requested} requested")]
    MissingDerivative { requested: usize, available: usize },
    #[error("finite-difference step underflow (h = {0})")]
    StepUnderflow(f64),
    #[error("diffeomorphism is not injective: sup|dζ| = {sup} at radius {r}")]
    NotInjective { sup: f64, r: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("vanishing mass, center of mass undefined")]
    VanishingMass,
    #[error("no calibration constant for (n, k) = ({0}, {1})")]
    MissingCalibration(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
