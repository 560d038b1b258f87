use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an integer or real parameter was violated.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// A special function or formula was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    /// The alternating sum in the closed-form rate lost too many digits.
    #[error(
        "numerically unstable closed-form rate for p={p}, q={q}, rho_eff={rho_eff:e}: \
         cancellation condition {condition:e}"
    )]
    NumericalInstability {
        p: usize,
        q: usize,
        rho_eff: f64,
        condition: f64,
    },

    #[error("at training length t_p={t_p}: {source}")]
    AtTrainingLength {
        t_p: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid experiment spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("internal invariant failed: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
