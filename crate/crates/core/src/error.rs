use thiserror::Error;

/// Errors raised by the library. Identification failure is not an error; it
/// is reported through [`crate::identify::IdentificationReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("size {size} is outside the supported range ({reason})")]
    SizeOutOfRange { size: usize, reason: &'static str },
    #[error("level {level} is out of range 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error("invalid cluster tree at level {level}: {reason}")]
    InvalidTree { level: usize, reason: TreeViolation },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The first axiom a candidate cluster tree breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeViolation {
    /// Wrong number of nodes or wrong node size at a level.
    Cardinality,
    /// The nodes of a level do not partition the index set.
    NotPartition,
    /// A node is not contained in any node of the level above.
    NotNested,
}

impl std::fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TreeViolation::Cardinality => "wrong cardinality",
            TreeViolation::NotPartition => "not a partition",
            TreeViolation::NotNested => "not nested in the parent level",
        };
        f.write_str(s)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Returns `log2(n)` when `n` is a power of two, `n >= 2`.
pub(crate) fn log2_exact(n: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros() as usize)
}
