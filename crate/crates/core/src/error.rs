use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("dangling edge {edge}: node {node} does not exist")]
    DanglingEdge { edge: usize, node: u32 },

    #[error("invalid edge {edge}: {reason}")]
    InvalidEdge { edge: usize, reason: String },

    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },

    #[error("{kind} {id} at ({x}, {y}) lies outside map bounds")]
    OutOfBounds {
        kind: &'static str,
        id: u32,
        x: f64,
        y: f64,
    },

    #[error("empty tag")]
    EmptyTag,

    #[error("tag {0:?} appears in more than one synonym group")]
    TagInMultipleGroups(String),

    #[error("no road points")]
    NoRoadPoints,

    #[error("empty map")]
    EmptyMap,

    #[error("no landmarks")]
    NoLandmarks,

    #[error("weight collapse: every particle score is -inf or NaN")]
    WeightCollapse,

    #[error("goal unreachable from start")]
    Unreachable,

    #[error("empty route")]
    EmptyRoute,

    #[error("no feasible trajectory")]
    NoFeasibleTrajectory,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
