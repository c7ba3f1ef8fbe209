use std::collections::HashMap;
use std::sync::Arc;

use super::exclusion::ExclusionSet;
use crate::error::{Error, Result};
use crate::gconstruct::FeatureMatrix;
use crate::partition::{GraphMeta, Partition};
use crate::schema::Fanout;
use crate::util::{mix64, DrawRng};

/// Sampled in-edges for a list of destination nodes, CSR-style.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampledEdges {
    pub offsets: Vec<usize>,
    pub src: Vec<u64>,
    pub eids: Vec<u64>,
}

impl SampledEdges {
    pub fn empty() -> Self {
        Self {
            offsets: vec![0],
            ..Self::default()
        }
    }

    pub fn num_dst(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn of(&self, j: usize) -> (&[u64], &[u64]) {
        let r = self.offsets[j]..self.offsets[j + 1];
        (&self.src[r.clone()], &self.eids[r])
    }

    pub fn append(&mut self, other: &SampledEdges, j: usize) {
        let (s, e) = other.of(j);
        self.src.extend_from_slice(s);
        self.eids.extend_from_slice(e);
        self.offsets.push(self.src.len());
    }
}

/// Seed of the draw for one destination node. Depends only on the batch seed
/// and the node, so any partitioning of the graph samples the same edges.
pub fn node_seed(batch_seed: u64, layer: usize, rel: usize, node: u64) -> u64 {
    mix64(&[batch_seed, layer as u64, rel as u64, node])
}

/// Samples in-edges of destination nodes owned by `part`, uniformly without
/// replacement among non-excluded in-edges. Kept edges stay in graph order.
pub fn sample_local(
    part: &Partition,
    rel: usize,
    dst: &[u64],
    fanout: Fanout,
    batch_seed: u64,
    layer: usize,
    exclusion: &ExclusionSet,
) -> Result<SampledEdges> {
    let dst_type = part.meta.relations[rel].dst_type;
    let store = part.rel(rel);
    let mut out = SampledEdges {
        offsets: Vec::with_capacity(dst.len() + 1),
        ..SampledEdges::default()
    };
    out.offsets.push(0);
    let mut candidates: Vec<u32> = Vec::new();
    for &v in dst {
        let local = part.local_id(dst_type, v).ok_or_else(|| {
            Error::Worker(format!(
                "partition {} asked to sample {} node {v} it does not own",
                part.part_id, part.meta.node_types[dst_type].name
            ))
        })?;
        candidates.clear();
        candidates.extend(
            part.rel(rel)
                .in_edges(local)
                .iter()
                .copied()
                .filter(|&pos| !exclusion.excludes(rel, store, pos as usize)),
        );
        match fanout.limit() {
            Some(k) if candidates.len() > k => {
                let mut rng = DrawRng::new(node_seed(batch_seed, layer, rel, v));
                let mut pick = rng.choose_distinct(candidates.len(), k);
                pick.sort_unstable();
                for i in pick {
                    let pos = candidates[i] as usize;
                    out.src.push(store.src[pos]);
                    out.eids.push(store.eids[pos]);
                }
            }
            _ => {
                for &pos in &candidates {
                    out.src.push(store.src[pos as usize]);
                    out.eids.push(store.eids[pos as usize]);
                }
            }
        }
        out.offsets.push(out.src.len());
    }
    Ok(out)
}

/// Anything that can sample in-edges and serve input features for typed global ids.
pub trait GraphAccess {
    fn meta(&self) -> &GraphMeta;

    fn sample(&self, rel: usize, dst: &[u64], fanout: Fanout, batch_seed: u64, layer: usize, exclusion: &Arc<ExclusionSet>) -> Result<SampledEdges>;

    fn fetch_features(&self, node_type: usize, ids: &[u64]) -> Result<FeatureMatrix>;
}

/// A single partition holding the whole graph is its own access path.
impl GraphAccess for Partition {
    fn meta(&self) -> &GraphMeta {
        &self.meta
    }

    fn sample(&self, rel: usize, dst: &[u64], fanout: Fanout, batch_seed: u64, layer: usize, exclusion: &Arc<ExclusionSet>) -> Result<SampledEdges> {
        sample_local(self, rel, dst, fanout, batch_seed, layer, exclusion)
    }

    fn fetch_features(&self, node_type: usize, ids: &[u64]) -> Result<FeatureMatrix> {
        self.local_inputs(node_type, ids)
    }
}

/// Sampled edges of one relation inside a block, as indexes into the block's
/// per-type node lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockEdges {
    pub src_idx: Vec<u32>,
    pub dst_idx: Vec<u32>,
    pub eids: Vec<u64>,
}

/// One layer's bipartite subgraph. Per node type, the destination nodes are
/// the first `num_dst[t]` entries of `src[t]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Block {
    pub src: Vec<Vec<u64>>,
    pub num_dst: Vec<usize>,
    pub edges: Vec<BlockEdges>,
}

impl Block {
    pub fn dst(&self, t: usize) -> &[u64] {
        &self.src[t][..self.num_dst[t]]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(|e| e.eids.len()).sum()
    }
}

/// Blocks in forward order: `blocks[0]` consumes input features, the
/// destinations of the last block are the seeds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MiniBatchBlocks {
    pub seeds: Vec<Vec<u64>>,
    pub blocks: Vec<Block>,
    /// Input features of the first layer's source nodes (0 columns for featureless types).
    pub inputs: Vec<FeatureMatrix>,
}

impl MiniBatchBlocks {
    /// Nodes whose input features feed the first layer.
    pub fn input_nodes(&self) -> &[Vec<u64>] {
        match self.blocks.first() {
            Some(b) => &b.src,
            None => &self.seeds,
        }
    }
}

fn dedup_seeds(seeds: &[Vec<u64>]) -> Vec<Vec<u64>> {
    seeds
        .iter()
        .map(|s| {
            let mut seen = std::collections::HashSet::with_capacity(s.len());
            s.iter().copied().filter(|x| seen.insert(*x)).collect()
        })
        .collect()
}

/// Samples `fanouts.len()` layers outward from `seeds` (per node type,
/// duplicates dropped, order kept) and gathers first-layer inputs.
/// `fanouts[l]` applies to block `l` in forward order.
pub fn build_blocks(
    access: &impl GraphAccess,
    seeds: &[Vec<u64>],
    fanouts: &[Fanout],
    batch_seed: u64,
    exclusion: &Arc<ExclusionSet>,
) -> Result<MiniBatchBlocks> {
    let (seeds, blocks) = sample_blocks(access, seeds, fanouts, batch_seed, exclusion)?;
    let meta = access.meta();
    let input_nodes = blocks.first().map(|b| b.src.clone()).unwrap_or_else(|| seeds.clone());
    let inputs = input_nodes
        .iter()
        .enumerate()
        .map(|(t, ids)| {
            if meta.node_types[t].input_dim() == 0 || ids.is_empty() {
                Ok(FeatureMatrix::zeros(ids.len(), meta.node_types[t].input_dim()))
            } else {
                access.fetch_features(t, ids)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MiniBatchBlocks { seeds, blocks, inputs })
}

/// Block structure only: deduplicated seeds and blocks in forward order.
pub fn sample_blocks(
    access: &impl GraphAccess,
    seeds: &[Vec<u64>],
    fanouts: &[Fanout],
    batch_seed: u64,
    exclusion: &Arc<ExclusionSet>,
) -> Result<(Vec<Vec<u64>>, Vec<Block>)> {
    let meta = access.meta();
    let num_types = meta.node_types.len();
    if seeds.len() != num_types {
        return Err(Error::Shape(format!("seeds given for {} node types, graph has {num_types}", seeds.len())));
    }
    let seeds = dedup_seeds(seeds);
    let mut frontier = seeds.clone();
    let mut blocks = Vec::with_capacity(fanouts.len());
    for layer in (0..fanouts.len()).rev() {
        let num_dst: Vec<usize> = frontier.iter().map(Vec::len).collect();
        let mut src = frontier.clone();
        let mut index: Vec<HashMap<u64, u32>> = frontier
            .iter()
            .map(|f| f.iter().enumerate().map(|(i, &g)| (g, i as u32)).collect())
            .collect();
        let mut edges = Vec::with_capacity(meta.relations.len());
        for (r, rm) in meta.relations.iter().enumerate() {
            let dst = &frontier[rm.dst_type];
            let mut be = BlockEdges::default();
            if !dst.is_empty() {
                let sampled = access.sample(r, dst, fanouts[layer], batch_seed, layer, exclusion)?;
                for j in 0..dst.len() {
                    let (s, e) = sampled.of(j);
                    for (&u, &eid) in s.iter().zip(e) {
                        let next = src[rm.src_type].len() as u32;
                        let idx = *index[rm.src_type].entry(u).or_insert_with(|| {
                            src[rm.src_type].push(u);
                            next
                        });
                        be.src_idx.push(idx);
                        be.dst_idx.push(j as u32);
                        be.eids.push(eid);
                    }
                }
            }
            edges.push(be);
        }
        blocks.push(Block { src: src.clone(), num_dst, edges });
        frontier = src;
    }
    blocks.reverse();
    Ok((seeds, blocks))
}
