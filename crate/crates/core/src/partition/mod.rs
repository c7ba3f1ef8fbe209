//! Edge-cut partitioning: node assignment, shuffling node and edge data to
//! owners, halo bookkeeping and the partition manifest.

mod assign;
mod meta;
mod shuffle;
mod store;

pub use assign::{hash_owner, hash_partition, random_partition, HashPartitioner, PartitionAssignment, Partitioner, RandomPartitioner};
pub use meta::{FeatureMeta, GraphMeta, NodeTypeMeta, RelationMeta};
pub use shuffle::{
    load_partition_data, shuffle_to_partitions, LocalEdges, LocalNodes, PartEntry, PartNodeEntry, PartRelEntry, PartitionData,
    PartitionManifest, PartitionedGraph,
};
pub use store::{load_all_partitions, load_owner_index, load_partition, partitions_in_memory, NodeStore, OwnerIndex, Partition, RelStore};
