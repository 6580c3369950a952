use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate column `{0}` in header")]
    DuplicateHeader(String),

    #[error("row {row}, column `{column}`: cannot parse `{cell}` as a finite number")]
    ParseNumber {
        row: usize,
        column: String,
        cell: String,
    },

    #[error("row {row} has {found} cells, expected {expected}")]
    RowWidth {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("column `{column}` has {found} non-missing values, need at least {needed}")]
    TooFewValues {
        column: String,
        needed: usize,
        found: usize,
    },

    #[error("column `{column}` is {actual}, expected {expected}")]
    KindMismatch {
        column: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("self-loop on `{0}`")]
    SelfLoop(String),

    #[error("edge {parent} -> {child} would create a cycle")]
    Cycle { parent: String, child: String },

    #[error("edge {parent} -> {child} already present")]
    EdgeExists { parent: String, child: String },

    #[error("edge {parent} -> {child} not present")]
    MissingEdge { parent: String, child: String },

    #[error("edge {parent} -> {child} is forbidden")]
    ForbiddenEdge { parent: String, child: String },

    #[error("no complete-case rows for family of `{0}`")]
    NoCompleteCases(String),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("record has no missing fields to restore")]
    NothingToRestore,

    #[error("no comparable variables between the two rows")]
    NoComparableVariables,

    #[error("pool has {available} rows, {needed} requested")]
    PoolTooSmall { needed: usize, available: usize },

    #[error("degenerate pool: {0}")]
    DegeneratePool(String),

    #[error("roc-auc needs both classes present")]
    SingleClass,

    #[error("invalid model: {0}")]
    Model(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for failures caused by the program itself rather than its inputs.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
