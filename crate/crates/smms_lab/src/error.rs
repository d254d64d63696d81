use thiserror::Error;

/// Every failure the library reports. Variants map one to one onto the
/// machine readable `kind` used by the command line runner.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("positivity violation: {0}")]
    Positivity(String),
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("construction failure: {0}")]
    Construction(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("step size too large: {0}")]
    StepSize(String),
    #[error("boundary closure failed: {0}")]
    BoundaryClosure(String),
    #[error("division guard: {0}")]
    DivisionGuard(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
}

impl LabError {
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::InvalidDomain(_) => "invalid_domain",
            LabError::InvalidInput(_) => "invalid_input",
            LabError::Positivity(_) => "positivity_violation",
            LabError::Hypothesis(_) => "hypothesis_violation",
            LabError::SolverFailure(_) => "solver_failure",
            LabError::Construction(_) => "construction_failure",
            LabError::Invariant(_) => "invariant_violation",
            LabError::StepSize(_) => "step_size",
            LabError::BoundaryClosure(_) => "boundary_closure",
            LabError::DivisionGuard(_) => "division_guard",
            LabError::NonConvergence(_) => "non_convergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
