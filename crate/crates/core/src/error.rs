//! Error taxonomy shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("no lattice state is reachable from the starting law")]
    EmptyReachableSet,

    #[error("objective family {family} requires state kind {required}, model has {actual}")]
    IncompatibleStateKind {
        family: String,
        required: String,
        actual: String,
    },

    #[error("marginals are not in convex order (pair {pair_index}, position {position})")]
    NotConvexOrder { pair_index: usize, position: i64 },

    #[error(
        "horizon too short: infeasibility {infeasibility:e} above {eps_horizon:e} at T={horizon}"
    )]
    HorizonTooShort {
        infeasibility: f64,
        eps_horizon: f64,
        horizon: u32,
    },

    #[error("LP solver stalled: {0}")]
    SolverFailure(String),

    #[error("stopping rule is not barrier shaped for colour {colour}: {detail}")]
    NotBarrierShaped { colour: usize, detail: String },

    #[error("enumeration depth {0} exceeds the exhaustive-oracle limit of 4")]
    DepthTooLarge(usize),

    #[error("family {0} is not supported by this operation")]
    UnsupportedFamily(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}
