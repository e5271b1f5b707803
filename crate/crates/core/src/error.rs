use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a Euclidean path could not be continued through collision `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFailureKind {
    /// The straight segment misses the translated cylinder.
    NoRealRoot,
    /// The segment grazes the cylinder (discriminant below tolerance).
    Tangential,
    /// The entry root is not strictly after the previous collision.
    NonAdvancing,
}

impl std::fmt::Display for TraceFailureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TraceFailureKind::NoRealRoot => "no real root",
            TraceFailureKind::Tangential => "tangential collision",
            TraceFailureKind::NonAdvancing => "non-advancing collision time",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trace failed at collision {index}: {kind}")]
    Trace { index: usize, kind: TraceFailureKind },

    #[error("no valid Euclidean path after {attempts} attempts")]
    NoValidPath { attempts: usize },

    #[error("subset enumeration refused: {k} cylinders exceeds the limit of {limit}")]
    EnumerationGuard { k: usize, limit: usize },

    #[error("base spaces do not form a direct sum: {0}")]
    NotDirectSum(String),

    #[error("lattice subspace check failed: {0}")]
    LatticeSubspace(String),

    #[error("start point lies inside cylinder {cylinder}")]
    StartInside { cylinder: usize },

    #[error("tangential collision with cylinder {cylinder} at time {time}")]
    Tangential { cylinder: usize, time: f64 },

    #[error("simultaneous collisions with cylinders {first} and {second} at time {time}")]
    Simultaneous { first: usize, second: usize, time: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by singular or degenerate dynamics rather
    /// than bad input.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::Trace { .. }
                | Error::NoValidPath { .. }
                | Error::Tangential { .. }
                | Error::Simultaneous { .. }
                | Error::Numerical(_)
                | Error::LatticeSubspace(_)
        )
    }
}
