use thiserror::Error;

use crate::graph::Vertex;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(Vertex),
    #[error("edge {0}-{1} is not covered by any bag")]
    UncoveredEdge(Vertex, Vertex),
    #[error("vertex {0} does not occur in any bag")]
    MissingVertex(Vertex),
    #[error("bags containing vertex {0} are not connected in the decomposition tree")]
    DisconnectedOccurrence(Vertex),
    #[error("bag {node} has {size} vertices, more than the bound {bound}")]
    WidthExceeded { node: usize, size: usize, bound: usize },
    #[error("decomposition is not a path rooted at an endpoint")]
    NotPath,
    #[error("malformed decomposition: {0}")]
    BadDecomposition(String),
    #[error("size guard exceeded: {0}")]
    GuardExceeded(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("infeasible routing: {0}")]
    Infeasible(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
