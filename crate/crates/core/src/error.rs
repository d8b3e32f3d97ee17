use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance: estimated error {estimate:e} > {target:e}")]
    Quadrature { estimate: f64, target: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("singular input: {0}")]
    SingularInput(String),

    /// The flow map is not a local diffeomorphism (at or after blowup).
    #[error("flow is singular at r0 = {r0}, t = {t}: jacobian {jacobian:e}")]
    FlowSingular { r0: f64, t: f64, jacobian: f64 },

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("integration stalled at t = {t}: step size fell below {min_step:e}")]
    StepUnderflow { t: f64, min_step: f64 },
}

impl Error {
    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Quadrature { .. } => "quadrature",
            Error::Config(_) => "config",
            Error::InvalidProfile(_) => "invalid_profile",
            Error::SingularInput(_) => "singular_input",
            Error::FlowSingular { .. } => "flow_singular",
            Error::Bisection(_) => "bisection",
            Error::StepUnderflow { .. } => "step_underflow",
        }
    }
}
