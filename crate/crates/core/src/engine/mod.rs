//! Distributed graph engine: partition servers, neighbor sampling into
//! layered blocks, leakage exclusion, feature fetch and gradient all-reduce.
//!
//! Workers are in-process actors. A worker reads its own partition directly
//! and reaches every other partition through [`messages::Request`]s, so a
//! networked deployment only swaps the channel transport.

mod allreduce;
mod blocks;
mod cluster;
mod exclusion;
pub mod messages;

pub use allreduce::{all_reduce_gradients, to_contributions, GradContribution, GradPayload, GradSet, GradientSync, Rendezvous, SparseRows};
pub use blocks::{build_blocks, node_seed, sample_blocks, sample_local, Block, BlockEdges, GraphAccess, MiniBatchBlocks, SampledEdges};
pub use cluster::{Cluster, MessageStats, WorkerContext};
pub use exclusion::ExclusionSet;
