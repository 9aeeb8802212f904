use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechError {
    #[error("operation requires the decreasing-marginal-values orientation")]
    WrongOrientation,
    #[error("point ({0}, {1}) lies on the support boundary and the density has no analytic gradient")]
    BoundaryPoint(f64, f64),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("the density vanishes on the slice v1 + v2 = {0}")]
    ZeroDensitySlice(f64),
    #[error("straightening cut {cut} outside [{lower}, {upper}]")]
    BadCut { cut: f64, lower: f64, upper: f64 },
    #[error("prices ({0}, {1}) are on a regime boundary; interior first-order conditions do not apply")]
    OnBoundary(f64, f64),
    #[error("type grid with {0} points per axis exceeds the cap of {1}")]
    GridTooLarge(usize, usize),
    #[error("LP solver failure: {0}")]
    SolverFailure(String),
    #[error("LP is infeasible")]
    Infeasible,
    #[error("LP is unbounded")]
    Unbounded,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, MechError>;
