//! Influence estimation and maximization for continuous-time diffusion networks.
//!
//! Every edge `j -> i` of a [`DiffusionNetwork`] carries a transmission-time
//! distribution. For one realization of all edge delays, the infection time of
//! a node is its shortest-path distance from the source set, so the influence
//! of a source set within a window `T` is the expected number of nodes whose
//! distance is at most `T`.
//!
//! The estimator samples edge delays, assigns exponential random labels to all
//! nodes and summarizes every node's neighborhood with a least-label list. Size
//! estimates for any source set then follow from a handful of binary searches,
//! which is what makes greedy source selection cheap.
//!
//! Module map:
//!
//! * [`graph`]: network representation and the graph-TSV format.
//! * [`transmission`]: per-edge delay distributions.
//! * [`netgen`]: stochastic Kronecker generator.
//! * [`oracle`]: exact per-sample infection times and naive sampling.
//! * [`sketch`]: least-label lists and the neighborhood-size estimator.
//! * [`estimator`]: the two-loop influence estimator.
//! * [`maximize`]: lazy greedy source selection.
//! * [`cascade`]: empirical influence from observed cascades.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod maximize;
pub mod netgen;
pub mod oracle;
pub mod rng;
pub mod sketch;
pub mod transmission;

pub use error::{Error, Result};
pub use estimator::{estimate_influence, EstimatorConfig, InfluenceEstimate};
pub use graph::{DiffusionNetwork, EdgeRecord, NodeId};
pub use maximize::{greedy_select, GreedyConfig, GreedyResult};
pub use transmission::TransmissionModel;
