use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A matrix with zero rows or zero columns.
    EmptyMatrix,
    /// A row whose length differs from the first row.
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    /// NaN or infinity in an input matrix.
    NonFinite {
        row: usize,
        col: usize,
    },
    /// A negative entry in a distance matrix.
    NegativeDistance {
        row: usize,
        col: usize,
    },
    /// Queries and database disagree on embedding dimensionality.
    DimensionMismatch {
        queries: usize,
        database: usize,
    },
    /// Two matrices that must share a shape do not.
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    EmptyLabels,
    /// Label count differs from the number of samples it describes.
    LabelCount {
        expected: usize,
        found: usize,
    },
    /// A self-exclusion pairing points outside the database.
    SelfMapOutOfRange {
        query: usize,
        index: usize,
    },
    /// Queries left without any relevant, non-excluded database item.
    SingletonQueries {
        queries: Vec<usize>,
    },
    /// A correct-matrix row without a single relevant item.
    NoRelevant {
        row: usize,
    },
    RankOutOfRange {
        k: usize,
        len: usize,
    },
    /// ε must be positive and strictly below the smallest positive gap.
    InvalidEpsilon {
        epsilon: f64,
        gap: Option<f64>,
    },
    InvalidThreshold(f64),
    InvalidRepetitions,
    /// A class with a single member cannot serve as a leave-one-out query.
    SingletonClass {
        label: String,
    },
    InvalidPermutation {
        len: usize,
    },
    /// A relation the implementation guarantees did not hold.
    Invariant(&'static str),
}

impl Error {
    /// `true` for errors caused by bad inputs, as opposed to broken invariants.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Invariant(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyMatrix => f.write_str("matrix must have at least one row and one column"),
            Error::RaggedRows { row, expected, found } => {
                write!(f, "row {row} has {found} values, expected {expected}")
            }
            Error::NonFinite { row, col } => {
                write!(f, "non-finite value at row {row}, column {col}")
            }
            Error::NegativeDistance { row, col } => {
                write!(f, "negative distance at row {row}, column {col}")
            }
            Error::DimensionMismatch { queries, database } => write!(
                f,
                "query dimensionality {queries} does not match database dimensionality {database}"
            ),
            Error::ShapeMismatch { expected, found } => write!(
                f,
                "shape mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::EmptyLabels => f.write_str("label vector is empty"),
            Error::LabelCount { expected, found } => {
                write!(f, "expected {expected} labels, found {found}")
            }
            Error::SelfMapOutOfRange { query, index } => write!(
                f,
                "self-exclusion for query {query} points at database index {index}, out of range"
            ),
            Error::SingletonQueries { queries } => {
                write!(f, "queries without relevant database items: ")?;
                for (i, q) in queries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{q}")?;
                }
                Ok(())
            }
            Error::NoRelevant { row } => write!(f, "row {row} contains no relevant item"),
            Error::RankOutOfRange { k, len } => {
                write!(f, "rank {k} outside 1..={len}")
            }
            Error::InvalidEpsilon { epsilon, gap } => match gap {
                Some(g) => write!(
                    f,
                    "epsilon {epsilon:e} must be positive and below the smallest distance gap {g:e}"
                ),
                None => write!(f, "epsilon {epsilon:e} must be positive"),
            },
            Error::InvalidThreshold(t) => write!(f, "threshold {t:e} must be positive"),
            Error::InvalidRepetitions => f.write_str("at least one repetition is required"),
            Error::SingletonClass { label } => {
                write!(f, "class {label:?} has a single member")
            }
            Error::InvalidPermutation { len } => {
                write!(f, "order is not a permutation of 0..{len}")
            }
            Error::Invariant(what) => write!(f, "internal invariant violated: {what}"),
        }
    }
}

impl core::error::Error for Error {}
