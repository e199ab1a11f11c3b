//! Delay analysis toolkit for binary spray-and-wait (BSW) routing in
//! intermittently connected networks.
//!
//! The message delivery delay of BSW is phase-type distributed: the protocol
//! state evolves as a continuous-time Markov chain whose absorbing state is
//! "delivered". This crate builds that chain in two flavours, solves it for
//! the delay CDF and the delivery ratio, and cross-validates the results with
//! a discrete-event contact simulator.
//!
//! * [`network`] — network descriptions (contact means) and their validation.
//! * [`partitions`] — copy partitions, the state space of the homogeneous chain.
//! * [`chain`] — the absorbing-chain container shared by both builders.
//! * [`homogeneous`] — chain over copy partitions when all pair rates are equal.
//! * [`heterogeneous`] — node-resolved chain for arbitrary contact graphs.
//! * [`solver`] — transient solution (uniformization), delivery ratio, KS distance.
//! * [`sim`] — Monte Carlo contact simulator and trace replay.

pub mod chain;
pub mod heterogeneous;
pub mod homogeneous;
pub mod network;
pub mod partitions;
pub mod sim;
pub mod solver;

pub use chain::{AbsorbingChain, ChainError, StateLabel, Transition};
pub use heterogeneous::{
    build_heterogeneous_chain, build_heterogeneous_chain_with_limit, count_states_l4, CopyMatrix,
    DEFAULT_MAX_STATES,
};
pub use homogeneous::{build_homogeneous_chain, build_homogeneous_chain_from_rate, ndc_variant};
pub use network::{
    random_sparse_spec, ContactMeans, ContactPair, ContactRateView, NetworkClass, NetworkSpec,
    NodeId, SpecError,
};
pub use partitions::{count_partitions, enumerate_partitions, CopyPartition, PartitionError};
pub use sim::{
    outcome_csv, replay_trace, simulate, ContactEvent, MessageOutcome, SimConfig, SimError,
};
pub use solver::{
    default_grid, empirical_cdf, ks_distance, log_grid, solve_cdf, solve_delivery_ratio, CdfKind,
    DelayDistribution, SolveError,
};
