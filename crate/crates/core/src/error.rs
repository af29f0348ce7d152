use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode index {index:?} out of range (mode cut {cut})")]
    ModeOutOfRange { index: Vec<usize>, cut: usize },
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("solver unstable at t = {t}: energy {energy:e} exceeds guard")]
    Unstable { t: f64, energy: f64 },
    #[error("observability not certified: min eigenvalue {min_eig:e} <= tolerance {tol:e}")]
    NotObservable { min_eig: f64, tol: f64 },
    #[error("gramian ill-conditioned: condition estimate {cond:e}")]
    IllConditioned { cond: f64 },
    #[error("gap {gap:e} exceeds squeezing radius d = {d:e}")]
    GapTooLarge { gap: f64, d: f64 },
    #[error("unknown density kind '{0}'")]
    UnknownDensity(String),
    #[error("{0}")]
    Data(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("chain step {step}: {inner}")]
    ChainStep { step: usize, inner: Box<Error> },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
