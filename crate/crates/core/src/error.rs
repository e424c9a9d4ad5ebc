use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field contains a non-finite sample at node {0}")]
    NonFinite(usize),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("advective CFL violated at t = {time}: dt*max|u|*xi_max = {number:.3e} >= 1")]
    Cfl { time: f64, number: f64 },

    #[error("solution exceeded {limit:e} at t = {time}; discretization failure")]
    BlowUp { time: f64, limit: f64 },

    #[error("Picard iteration is not contracting (residuals {residuals:?}); use a smaller t")]
    PicardDiverged { residuals: Vec<f64> },

    #[error(
        "Newton solver did not converge in {iterations} iterations (final residual {residual:.3e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error(
        "constraint Jacobian has rank {rank} < {needed}; choose a different perturbation basis"
    )]
    DegenerateJacobian { rank: usize, needed: usize },

    #[error("unknown probe `{0}`")]
    UnknownProbe(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
