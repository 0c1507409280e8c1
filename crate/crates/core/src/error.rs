use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Surface-file syntax or content problem.
    #[error("{path}:{line}: {msg}")]
    PesFormat {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("missing parameter {0}")]
    MissingParameter(String),

    #[error("eigensolver did not converge: worst residual {residual:.3e} after {iterations} iterations")]
    Convergence { residual: f64, iterations: usize },

    #[error("propagation failed at t = {t_fs:.4} fs: {msg}")]
    Propagation { t_fs: f64, msg: String },

    #[error("spectrum of mode {mode} reaches only {reached:.6} hartree, need coverage up to {needed:.6}")]
    Coverage {
        mode: &'static str,
        reached: f64,
        needed: f64,
    },

    #[error("energy window {center:.6} +/- {half_width:.6} hartree contains no zero-order states; increase delta_e")]
    DegenerateWindow { center: f64, half_width: f64 },

    #[error("wavefunction norm {norm:.3e} is too small to renormalize")]
    DegenerateState { norm: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI: 2 for configuration/input
    /// problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::PesFormat { .. }
            | Error::MissingParameter(_)
            | Error::InvalidParameter(_)
            | Error::InvalidArgument(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
