use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Everything except [`Error::Io`] and [`Error::NonFiniteLoss`] is a
/// validation failure: the caller handed in something malformed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("missing header row")]
    MissingHeader,

    #[error("class list is empty")]
    EmptyClassList,

    #[error("empty class name in column {column}")]
    EmptyClassName { column: usize },

    #[error("class name {name:?} contains a comma")]
    CommaInClassName { name: String },

    #[error("duplicate class name {name:?}")]
    DuplicateClass { name: String },

    #[error("no samples")]
    NoSamples,

    #[error("row {row}: expected {expected} fields, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, class {class:?}: {value:?} is not a number")]
    NonNumeric {
        row: usize,
        class: String,
        value: String,
    },

    #[error("row {row}, class {class:?}: {value} is not a finite value")]
    NonFinite {
        row: usize,
        class: String,
        value: f64,
    },

    #[error("row {row}, class {class:?}: {value} is outside [0, 1]")]
    OutOfRange {
        row: usize,
        class: String,
        value: f64,
    },

    #[error("row {row}, class {class:?}: {value:?} is not a binary label (expected 0 or 1)")]
    NonBinary {
        row: usize,
        class: String,
        value: String,
    },

    #[error(
        "class order mismatch in input {input}: expected [{}], found [{}]; \
         reorder columns by taking found positions {permutation:?}",
        .expected.join(","),
        .found.join(",")
    )]
    ClassOrder {
        input: usize,
        expected: Vec<String>,
        found: Vec<String>,
        /// `permutation[j]` is the column of `found` holding `expected[j]`.
        permutation: Vec<usize>,
    },

    #[error(
        "class set mismatch in input {input}: expected [{}], found [{}]",
        .expected.join(","),
        .found.join(",")
    )]
    ClassSet {
        input: usize,
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("sample count mismatch in input {input}: expected {expected}, found {found}")]
    SampleCount {
        input: usize,
        expected: usize,
        found: usize,
    },

    #[error(
        "shape mismatch: expected {expected_rows}x{expected_cols}, found {found_rows}x{found_cols}"
    )]
    Shape {
        expected_rows: usize,
        expected_cols: usize,
        found_rows: usize,
        found_cols: usize,
    },

    #[error("no prediction matrices supplied")]
    NoPredictions,

    #[error("need at least {required} models, found {found}")]
    TooFewModels { required: usize, found: usize },

    #[error("expected {expected} weights, found {found}")]
    WeightArity { expected: usize, found: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("AUC is undefined for every class (each has no positives or no negatives)")]
    AllClassesUndefined,

    #[error("class {class:?} is degenerate: {positives} positives, {negatives} negatives")]
    DegenerateClass {
        class: String,
        positives: usize,
        negatives: usize,
    },

    #[error("unknown class {name:?}; available: {}", .available.join(", "))]
    UnknownClass {
        name: String,
        available: Vec<String>,
    },

    #[error("{which} partition is empty")]
    EmptyPartition { which: &'static str },

    #[error("loss became non-finite at epoch {epoch} ({value})")]
    NonFiniteLoss { epoch: usize, value: f64 },
}

impl Error {
    /// True when the error stems from invalid input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::NonFiniteLoss { .. })
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Csv(format!("{other:?}")),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
