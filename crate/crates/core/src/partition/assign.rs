use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gconstruct::ConstructedGraph;
use crate::util::{stable_hash, DrawRng};

/// Owner partition of every node, per node type (graph order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    pub num_parts: usize,
    pub per_type: Vec<Vec<u32>>,
}

impl PartitionAssignment {
    pub fn part_sizes(&self, node_type: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.num_parts];
        for &p in &self.per_type[node_type] {
            sizes[p as usize] += 1;
        }
        sizes
    }
}

/// Strategy slot. Only random and hash assignment ship; a min-cut
/// partitioner would implement this trait.
pub trait Partitioner {
    fn assign(&self, graph: &ConstructedGraph, num_parts: usize) -> Result<PartitionAssignment>;
}

#[derive(Debug, Clone, Copy)]
pub struct RandomPartitioner {
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HashPartitioner;

impl Partitioner for RandomPartitioner {
    fn assign(&self, graph: &ConstructedGraph, num_parts: usize) -> Result<PartitionAssignment> {
        random_partition(graph, num_parts, self.seed)
    }
}

impl Partitioner for HashPartitioner {
    fn assign(&self, graph: &ConstructedGraph, num_parts: usize) -> Result<PartitionAssignment> {
        hash_partition(graph, num_parts)
    }
}

fn check_parts(num_parts: usize) -> Result<()> {
    if num_parts == 0 || num_parts > u32::MAX as usize {
        return Err(Error::invalid(format!("number of partitions must be >= 1, got {num_parts}")));
    }
    Ok(())
}

/// Each node independently uniform over `0..num_parts`, one seeded stream
/// walking node types in graph order.
pub fn random_partition(graph: &ConstructedGraph, num_parts: usize, rng_seed: u64) -> Result<PartitionAssignment> {
    check_parts(num_parts)?;
    let mut rng = DrawRng::new(rng_seed);
    let per_type = graph
        .nodes
        .iter()
        .map(|n| (0..n.count()).map(|_| rng.index(num_parts) as u32).collect())
        .collect();
    Ok(PartitionAssignment { num_parts, per_type })
}

/// `stable_hash(node_type, node_id) mod num_parts`; needs no seed.
pub fn hash_partition(graph: &ConstructedGraph, num_parts: usize) -> Result<PartitionAssignment> {
    check_parts(num_parts)?;
    let per_type = graph
        .nodes
        .iter()
        .map(|n| {
            (0..n.count() as u64)
                .map(|id| hash_owner(&n.node_type, id, num_parts))
                .collect()
        })
        .collect();
    Ok(PartitionAssignment { num_parts, per_type })
}

pub fn hash_owner(node_type: &str, id: u64, num_parts: usize) -> u32 {
    (stable_hash(&[node_type.as_bytes(), &id.to_le_bytes()]) % num_parts as u64) as u32
}
