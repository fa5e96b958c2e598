use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pole of Gamma at {re}+{im}i")]
    Pole { re: f64, im: f64 },
    #[error("Gamma overflow: log-modulus {0}")]
    Range(f64),
    #[error("outside asymptotic domain: {0}")]
    Domain(String),
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("integrand does not decay: {0}")]
    DecayProbeFailed(String),
    #[error("dimension {0} unsupported")]
    DimensionUnsupported(usize),
    #[error("shift leaves analyticity strip on axis {0}")]
    StripExhausted(usize),
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("invalid step {0}")]
    StepInvalid(f64),
    #[error("rank ell={0} unsupported")]
    RankUnsupported(usize),
    #[error("kappa={kappa} out of range (bound {bound})")]
    KappaOutOfRange { kappa: f64, bound: f64 },
    #[error("no printed Whittaker vector for {0}")]
    NoPrintedVector(String),
    #[error("Gamma argument with non-positive real part: {0}")]
    GammaArgumentViolation(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("parameter constraint violated: {0}")]
    ParameterConstraintViolated(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
}

impl Error {
    /// Numerical failures map to exit code 2, everything else to 1.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence(_) | Error::DecayProbeFailed(_) | Error::DimensionUnsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
