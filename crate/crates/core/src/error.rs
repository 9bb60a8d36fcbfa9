use thiserror::Error;

use crate::diagnostics::CoherentFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite state at t = {time}")]
    NonFiniteState { time: f64 },
    #[error("fit window holds {samples} samples, at least 10 are required")]
    DegenerateWindow { samples: usize },
    #[error("fixed point is not hyperbolic (eigenvalues {0})")]
    NotHyperbolic(String),
    #[error("Newton refinement found no fixed point after {iterations} iterations")]
    NoFixedPoint { iterations: usize },
    #[error("level set h = {energy} is empty")]
    EmptyLevelSet { energy: f64 },
    #[error("level set h = {energy} is unbounded")]
    UnboundedLevelSet { energy: f64 },
    #[error("operation not supported for system: {0}")]
    UnsupportedSystem(&'static str),
    #[error("mass escaped to the grid boundary ({boundary_mass:e} > {threshold:e})")]
    MassEscape { boundary_mass: f64, threshold: f64 },
    #[error("wavefunctions live on different grids or hbar values")]
    GridMismatch,
    #[error("differential order {0} exceeds the supported maximum of 2")]
    OrderUnsupported(usize),
    #[error("momentum {p} exceeds the grid's Nyquist momentum {nyquist}")]
    MomentumOutOfBand { p: f64, nyquist: f64 },
    #[error("coherent fit stalled with gradient norm {gradient:e}")]
    OptimizerStalled { best: Box<CoherentFit>, gradient: f64 },
    #[error("search window [{start}, {end}] outside recorded times [{first}, {last}]")]
    WindowOutOfRange { start: f64, end: f64, first: f64, last: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("run at hbar = {hbar} failed: {source}")]
    Sweep {
        hbar: f64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Sweep { source, .. } => source.is_numerical(),
            Error::NonFiniteState { .. }
            | Error::MassEscape { .. }
            | Error::OptimizerStalled { .. }
            | Error::NoFixedPoint { .. }
            | Error::NotHyperbolic(_)
            | Error::DegenerateWindow { .. } => true,
            _ => false,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
