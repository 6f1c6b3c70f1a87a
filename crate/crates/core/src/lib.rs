//! Lattice workbench for the optimal multi-marginal Skorokhod embedding
//! problem on the simple random walk.
//!
//! The pipeline: validate marginals ([`measures`]), build the walk's state
//! graph ([`lattice`]), encode randomized multi-stopping times as an
//! occupation-measure LP and solve it lexicographically ([`lp`],
//! [`simplex`]), extract and re-propagate barrier families ([`barriers`]),
//! and certify the geometric no-stop-go structure of the optimizers
//! ([`stopgo`]). Everything runs in `f64` or in exact rational arithmetic.

pub mod barriers;
pub mod error;
pub mod lattice;
pub mod lp;
pub mod measures;
pub mod objective;
pub mod rule;
pub mod scalar;
pub mod sim;
pub mod simplex;
pub mod stopgo;

pub use error::Error;
pub use lattice::{build_model, default_horizon, LatticeModel, State, StateId, StateKind};
pub use lp::{
    permuted_weight_resolve, solve_embedding, EmbeddingSolution, SolveOutcome, SolveParams,
    StoppingLp,
};
pub use measures::{ConvexOrderWitness, DiscreteMeasure, MarginalSequence, MeasureSpec};
pub use objective::{CostTable, Family, Objective};
pub use rule::StoppingRule;
pub use scalar::{Scalar, Weight};
