use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("empty set of distributions")]
    EmptySet,

    #[error("{what} has a negative or non-finite entry {value} at index {index}")]
    InvalidEntry {
        what: String,
        index: usize,
        value: f64,
    },

    #[error("{what} sums to {sum}, expected 1")]
    NotStochastic { what: String, sum: f64 },

    #[error("duplicate {kind} identifier `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("unknown secret `{0}`")]
    UnknownSecret(String),

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("secret index {index} out of range for {len} secrets")]
    SecretOutOfRange { index: usize, len: usize },

    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),

    #[error("at least {required} secrets required, got {found}")]
    TooFewSecrets { required: usize, found: usize },

    #[error("leakage is infinite (posterior risk is zero)")]
    InfiniteLeakage,

    #[error("secret {0} has prior probability 1; no other-secret behavior is defined")]
    DegeneratePrior(usize),

    #[error("adversary not supported here: {0}")]
    UnsupportedAdversary(String),

    #[error("dimension {found} exceeds the cap of {cap}")]
    DimensionCap { found: usize, cap: usize },

    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("linear program solver failed: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("degenerate sample split: {0}")]
    DegenerateSplit(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
