use thiserror::Error;

use crate::fit::FitResult;
use crate::model::Violation;

pub type Result<T> = std::result::Result<T, GflsrError>;

#[derive(Debug, Error)]
pub enum GflsrError {
    #[error("degenerate direction: vector has zero norm")]
    DegenerateDirection,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model parameters: {0:?}")]
    InvalidParams(Vec<Violation>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("degrees of freedom too small: dof {dof} must exceed {min}")]
    DofTooSmall { dof: f64, min: f64 },

    #[error("quantile singularity at t = {0}")]
    QuantileSingularity(f64),

    #[error("zero variance input")]
    ZeroVariance,

    #[error("no dependence signal: cross-covariance is identically zero")]
    NoDependenceSignal,

    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("insufficient components: rank collapsed after {reached} of {requested}")]
    InsufficientComponents {
        reached: usize,
        requested: usize,
        partial: Box<FitResult>,
    },

    #[error("optimizer stagnated (best objective {best_objective})")]
    OptimizerStagnation {
        best_objective: f64,
        best_u: Vec<f64>,
        best_v: Vec<f64>,
        trace: Vec<f64>,
    },

    #[error("noise exceeds signal variance: corrected denominator {0} is not positive")]
    NoiseExceedsSignal(f64),

    #[error("bootstrap failed: {failed} of {total} replicates did not refit")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("{0}")]
    Load(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl GflsrError {
    /// True for failures of the numerical routines, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            GflsrError::DegenerateDirection
                | GflsrError::NotPositiveDefinite
                | GflsrError::QuantileSingularity(_)
                | GflsrError::ZeroVariance
                | GflsrError::NoDependenceSignal
                | GflsrError::NoConvergence { .. }
                | GflsrError::InsufficientComponents { .. }
                | GflsrError::OptimizerStagnation { .. }
                | GflsrError::NoiseExceedsSignal(_)
                | GflsrError::BootstrapFailures { .. }
        )
    }
}
