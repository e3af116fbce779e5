use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("empty cell at row {row}, column '{column}'")]
    EmptyCell { row: usize, column: String },
    #[error("column '{column}' has {cardinality} categories; at least 2 are required")]
    DegenerateColumn { column: String, cardinality: usize },
    #[error("dataset has no {0}")]
    EmptyDataset(&'static str),
    #[error("code {code} at row {row}, column {column} is outside [0, {cardinality})")]
    CodeOutOfRange {
        row: usize,
        column: usize,
        code: u32,
        cardinality: usize,
    },
    #[error("node index {node} out of range for {p} variables")]
    NodeOutOfRange { node: usize, p: usize },
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("node {0} listed more than once")]
    DuplicateNode(usize),
    #[error("variables {requested:?} are not a subset of table variables {available:?}")]
    NotSubset {
        requested: Vec<usize>,
        available: Vec<usize>,
    },
    #[error("node {0} cannot be its own parent")]
    SelfParent(usize),
    #[error("table over {vars:?} needs {cells} cells, above the budget of {budget}")]
    CellBudget {
        vars: Vec<usize>,
        cells: u128,
        budget: usize,
    },
    #[error("adding edge {from} -> {to} closes the cycle {path:?}")]
    Cycle {
        from: usize,
        to: usize,
        path: Vec<usize>,
    },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge {0} -> {1} already present")]
    DuplicateEdge(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{what} needs {needed} terms, above the budget of {budget}; use a Monte Carlo estimate instead")]
    Budget {
        what: &'static str,
        needed: u128,
        budget: usize,
    },
    #[error("series of length {0} is too short (need at least 10)")]
    SeriesTooShort(usize),
    #[error("empty structure trace")]
    EmptyTrace,
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad classes used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Budget,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            CellBudget { .. } | Budget { .. } => ErrorClass::Budget,
            RaggedRow { .. }
            | EmptyCell { .. }
            | DegenerateColumn { .. }
            | EmptyDataset(_)
            | CodeOutOfRange { .. }
            | Io(_)
            | Csv(_) => ErrorClass::Data,
            _ => ErrorClass::Config,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
