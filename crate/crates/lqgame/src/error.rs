use thiserror::Error;

/// Errors raised by the solvers and loaders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LqError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The inner maximisation is ill-posed for this controller gain.
    #[error("gain infeasible at step {step}: min eigenvalue {eigenvalue:.6e}")]
    InfeasibleGain { step: usize, eigenvalue: f64 },
    #[error("Lambda_{step} is numerically singular")]
    SingularLambda { step: usize },
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("risk-sensitivity condition fails at step {step}: margin {margin:.6e}")]
    RiskFeasibility { step: usize, margin: f64 },
    #[error("attenuation condition fails at step {step}: margin {margin:.6e}")]
    AttenuationFeasibility { step: usize, margin: f64 },
    #[error("saddle-point assumption violated at step {step}: min eigenvalue {eigenvalue:.6e}")]
    AssumptionViolated { step: usize, eigenvalue: f64 },
}

pub type Result<T> = std::result::Result<T, LqError>;
