use thiserror::Error;

use crate::equilibrium::{ConvergenceReport, IonConfiguration};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "unstable trap: axial frequency {omega_z:.6e} rad/s must stay below omega_c/sqrt(2) = {limit:.6e} rad/s"
    )]
    Unstable { omega_z: f64, limit: f64 },

    #[error(
        "rotation frequency {omega_r:.6e} rad/s outside the confinement window (omega_m, Omega_m) = ({lower:.6e}, {upper:.6e}) rad/s"
    )]
    OutsideRotationWindow { omega_r: f64, lower: f64, upper: f64 },

    #[error("empty sweep grid")]
    EmptyGrid,

    #[error("aspect-ratio relation has no sign change on (0, 1) for beta = {beta}")]
    NoBracket {
        beta: f64,
        /// Sampled (alpha, residual) pairs.
        samples: Vec<(f64, f64)>,
    },

    #[error("adaptive step size underflow at t = {time:.9e} s")]
    StepUnderflow { time: f64 },

    #[error("non-finite state encountered at t = {time:.9e} s")]
    NonFinite { time: f64 },

    #[error("trajectory sampling is not uniform; rerun with the fixed-step RK4 integrator")]
    NonUniformSampling,

    #[error("spectrum needs at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },

    #[error("ions {i} and {j} coincide")]
    CoincidentIons { i: usize, j: usize },

    #[error(
        "relaxation did not converge: max force {:.3e} N after {} iterations",
        report.max_force_n, report.iterations
    )]
    NotConverged {
        report: ConvergenceReport,
        best: Box<IonConfiguration>,
    },

    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("missing value for required field `{0}`")]
    MissingField(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::Unstable { .. }
            | Error::OutsideRotationWindow { .. }
            | Error::EmptyGrid
            | Error::ConfigParse { .. }
            | Error::MissingField(_)
            | Error::UnknownKey(_)
            | Error::Io(_)
            | Error::CoincidentIons { .. } => 2,
            Error::NoBracket { .. }
            | Error::StepUnderflow { .. }
            | Error::NonFinite { .. }
            | Error::NonUniformSampling
            | Error::TooFewSamples { .. }
            | Error::NotConverged { .. }
            | Error::Csv(_)
            | Error::Json(_) => 3,
        }
    }
}
