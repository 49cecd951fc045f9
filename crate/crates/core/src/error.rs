use std::path::PathBuf;

use thiserror::Error;

use crate::grid::{InterfaceId, SubdomainId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid parameter n must be at least 2, got {0}")]
    InvalidGridSize(usize),

    #[error("node ({i}, {j}) is outside the lattice [-{n}, {n}]^2")]
    NodeOutOfRange { i: i32, j: i32, n: usize },

    #[error("fields live on different grids (n = {left} vs n = {right})")]
    GridMismatch { left: usize, right: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: entry ({row}, {col}) has no matching transpose")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is singular: pivot {pivot:e} at row {row} is below {threshold:e}")]
    Singular {
        row: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error(
        "conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{edge} is not an edge of {sub}")]
    EdgeNotAdjacent { sub: SubdomainId, edge: InterfaceId },

    #[error("boundary data for {sub} is incomplete: {reason}")]
    IncompleteBc { sub: SubdomainId, reason: String },

    #[error("subfield for {0} is missing")]
    MissingSubdomain(SubdomainId),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: expected {expected} nodes, found {found}")]
    NodeCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
