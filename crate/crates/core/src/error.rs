use thiserror::Error;

use crate::msa::Solution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("unknown node label `{0}`")]
    UnknownNode(String),

    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),

    #[error("edge index {0} out of range")]
    EdgeOutOfRange(usize),

    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("forbidden node must differ from both endpoints")]
    ForbiddenEndpoint,

    #[error("poles must be distinct")]
    SamePoles,

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("not converged after {sweeps} iterations (residual {residual:e})")]
    NotConverged {
        sweeps: usize,
        residual: f64,
        best: Box<Solution>,
    },

    #[error("flux at the upper bracket is negative ({0:e}); monotonicity violated")]
    BracketViolation(f64),

    #[error("negative current {0}")]
    NegativeCurrent(f64),

    #[error("candidate flow violates conservation at nodes {nodes:?} (worst {worst:e})")]
    Infeasible { nodes: Vec<usize>, worst: f64 },

    #[error("pole current underflowed to zero although the sink is reachable")]
    CurrentUnderflow,

    #[error("network is not series-parallel reducible ({remaining} edges remain)")]
    NotSeriesParallel { remaining: usize },

    #[error("no directed path between the requested nodes")]
    Unreachable,

    #[error("boundary fluxes sum to {0:e}, expected 0")]
    UnbalancedBoundary(f64),

    #[error(
        "no satisfactory flow: cut {left:?} has positive deficiency {deficiency} and zero capacity"
    )]
    NoSatisfactoryFlow { left: Vec<usize>, deficiency: f64 },

    #[error("balanced-flow did not terminate within {0} stages")]
    NonTerminating(usize),

    #[error("cut enumeration limited to {limit} nodes, circuit has {nodes}")]
    NodeBudget { limit: usize, nodes: usize },

    #[error("support edge set is empty")]
    EmptySupport,

    #[error("pair ({a}, {b}): {source}")]
    Pair {
        a: usize,
        b: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{} pair solves failed; first: {}", .0.len(), .0[0])]
    PairFailures(Vec<Error>),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
