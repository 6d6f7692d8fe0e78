use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integration exceeded {max_steps} steps at t = {t}")]
    StepLimit { t: f64, max_steps: usize },

    #[error("step size underflow at t = {t}")]
    StepTooSmall { t: f64 },

    #[error("non-finite field value at t = {t}, x = {x:?}")]
    NonFinite { t: f64, x: Vec<f64> },

    #[error("time {t} outside trajectory interval [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("field vanishes on the boundary at ({}, {}) with norm {norm:e}", point[0], point[1])]
    FieldVanishes { point: [f64; 2], norm: f64 },

    #[error("winding number did not converge after {samples} boundary samples")]
    NonConvergent { samples: usize },

    #[error("region has no star center; contraction needs one")]
    MissingStarCenter,

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("trajectory is not periodic: residual {residual:e}")]
    NotPeriodic { residual: f64 },

    #[error("eigenvalue computation failed")]
    Eigen,

    #[error("averaged field did not converge up to n = {n} (last Cauchy estimate {estimate:e})")]
    AveragingNoConvergence { n: usize, estimate: f64, trend: Vec<f64> },

    #[error("averaged trajectory left the validated ball of radius {radius} at slow time {t}")]
    LeftBall { t: f64, norm: f64, radius: f64 },

    #[error("singular Jacobian (smallest singular value {sigma_min:e})")]
    SingularJacobian { sigma_min: f64 },

    #[error("Newton iteration stalled; residual history {residuals:?}")]
    NewtonStalled { residuals: Vec<f64> },
}
