use thiserror::Error;

/// Errors raised by the fusion engine and its supporting modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("context vector has (near) zero norm")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("round {0} has no ground truth and cannot be banked")]
    UnlabelledRecord(u64),
    #[error("round id {0} is already present in the bank")]
    DuplicateRoundId(u64),
    #[error("round {round_id} is missing a report from expert {expert}")]
    MissingExpertReport { round_id: u64, expert: String },
    #[error("round {0} is unlabelled")]
    UnlabelledRound(u64),
    #[error("exact Shapley enumeration supports at most {max} experts, got {found}")]
    TooManyExperts { max: usize, found: usize },
    #[error("threshold tuning needs at least one labelled round")]
    EmptySplit,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("expected {expected} expert profiles, got {found}")]
    ProfileCountMismatch { expected: usize, found: usize },
    #[error("round ids must be strictly increasing: {previous} followed by {next}")]
    NonMonotoneRounds { previous: u64, next: u64 },
    #[error("dataset contains no rounds")]
    EmptyDataset,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl FusionError {
    /// True for errors caused by bad input rather than a failing environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, FusionError::Io(_))
    }
}

impl From<std::io::Error> for FusionError {
    fn from(err: std::io::Error) -> Self {
        FusionError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FusionError>;
