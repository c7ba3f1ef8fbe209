//! End-to-end heterogeneous graph learning at desk scale.
//!
//! The pipeline runs in four stages, each usable on its own:
//!
//! 1. [`gconstruct`] turns CSV / JSON-lines tables described by a
//!    [`schema::GraphSchema`] into a typed graph with contiguous integer ids,
//!    transformed feature matrices and split masks.
//! 2. [`partition`] assigns nodes to partitions (edges follow their
//!    destination), shuffles data to owners and writes a partition manifest.
//! 3. [`engine`] hosts one in-process worker per partition. Workers sample
//!    neighbor blocks on the fly, fetch remote features and average
//!    gradients through explicit messages.
//! 4. [`pipeline`] trains and evaluates node classification and link
//!    prediction models built from [`model`] and [`lp`], exports embeddings,
//!    and [`distill`] compresses a trained encoder into a graph-free MLP.

pub mod distill;
pub mod engine;
pub mod error;
pub mod gconstruct;
pub mod lp;
pub mod model;
pub mod partition;
pub mod pipeline;
pub mod schema;
pub mod synth;
pub mod util;

pub use error::{Error, Result};
