//! Trainers, evaluators and embedding export.
//!
//! A training run hosts one worker thread per partition. Each global batch
//! is dealt round-robin to the workers; a worker's gradient is scaled by
//! `W / B` so the averaged gradient equals the gradient of the pooled batch
//! mean. Evaluation and inference encode every node layer by layer with all
//! neighbors, so results do not depend on sampling.

mod construct;
mod embed;
mod metrics;
mod train;
mod two_stage;
mod workers;

pub use construct::{construct_featureless_inputs, prepare_partitions};
pub use embed::{infer_embeddings, write_embeddings};
pub use metrics::{corruptions, evaluate_accuracy, mean_reciprocal_rank, rank_of};
pub use train::{train, train_link_prediction, train_node_classification, BatchView, EpochRecord, TrainHooks, TrainOutput, TrainReport};
pub use two_stage::{freeze_embeddings, two_stage_featureless, TwoStageOutput};
pub use workers::EdgeRef;

