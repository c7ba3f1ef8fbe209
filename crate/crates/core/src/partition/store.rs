use std::path::Path;
use std::sync::Arc;

use super::meta::GraphMeta;
use super::shuffle::{load_partition_data, PartitionData, PartitionManifest};
use crate::error::{Error, Result};
use crate::gconstruct::{FeatureMatrix, SplitMasks};

/// Owner and owner-local position of every node of one type. Shared by all
/// partitions of a cluster, so lookups are O(1) array reads.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnerIndex {
    pub owner: Vec<u32>,
    pub local: Vec<u32>,
}

impl OwnerIndex {
    pub fn from_owners(owner: Vec<u32>, num_parts: usize) -> Self {
        let mut next = vec![0u32; num_parts];
        let local = owner
            .iter()
            .map(|&p| {
                let l = next[p as usize];
                next[p as usize] += 1;
                l
            })
            .collect();
        Self { owner, local }
    }
}

#[derive(Debug, Clone)]
pub struct NodeStore {
    pub global_ids: Vec<u64>,
    /// All features concatenated column-wise, one row per owned node.
    pub inputs: FeatureMatrix,
    pub labels: Option<Vec<i32>>,
    pub split: Option<SplitMasks>,
    pub halo_ids: Vec<u64>,
    pub halo_owner: Vec<u32>,
}

/// Owned edges of one relation plus an in-edge index keyed by local destination.
#[derive(Debug, Clone)]
pub struct RelStore {
    pub src: Vec<u64>,
    pub dst: Vec<u64>,
    pub eids: Vec<u64>,
    pub weights: Option<Vec<f32>>,
    pub split: Option<SplitMasks>,
    offsets: Vec<usize>,
    order: Vec<u32>,
}

impl RelStore {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Positions (into `src`/`dst`) of the in-edges of a local destination,
    /// in global edge order.
    pub fn in_edges(&self, local_dst: usize) -> &[u32] {
        &self.order[self.offsets[local_dst]..self.offsets[local_dst + 1]]
    }
}

/// A loaded, immutable partition.
#[derive(Debug)]
pub struct Partition {
    pub part_id: usize,
    pub meta: Arc<GraphMeta>,
    index: Vec<Arc<OwnerIndex>>,
    nodes: Vec<NodeStore>,
    rels: Vec<RelStore>,
}

impl Partition {
    pub fn from_data(meta: Arc<GraphMeta>, index: Vec<Arc<OwnerIndex>>, data: PartitionData) -> Result<Self> {
        let part_id = data.part_id;
        let nodes: Vec<NodeStore> = data
            .nodes
            .into_iter()
            .enumerate()
            .map(|(t, n)| {
                let rows = n.global_ids.len();
                let cols = meta.node_types[t].input_dim();
                let mut inputs = FeatureMatrix::zeros(rows, cols);
                let mut offset = 0;
                for f in &n.features {
                    for r in 0..rows {
                        inputs.data[r * cols + offset..r * cols + offset + f.cols].copy_from_slice(f.row(r));
                    }
                    offset += f.cols;
                }
                NodeStore {
                    global_ids: n.global_ids,
                    inputs,
                    labels: n.labels,
                    split: n.split,
                    halo_ids: n.halo_ids,
                    halo_owner: n.halo_owner,
                }
            })
            .collect();
        for (t, n) in nodes.iter().enumerate() {
            let idx = &index[t];
            for (l, &g) in n.global_ids.iter().enumerate() {
                if idx.owner.get(g as usize).map(|&o| o as usize) != Some(part_id) || idx.local[g as usize] as usize != l {
                    return Err(Error::Manifest(format!(
                        "partition {part_id}: node {g} of {} disagrees with the node map",
                        meta.node_types[t].name
                    )));
                }
            }
        }
        let rels = data
            .edges
            .into_iter()
            .zip(&meta.relations)
            .map(|(e, rm)| {
                let n_local = nodes[rm.dst_type].global_ids.len();
                let local_of = &index[rm.dst_type].local;
                let mut offsets = vec![0usize; n_local + 1];
                for &d in &e.dst {
                    offsets[local_of[d as usize] as usize + 1] += 1;
                }
                for i in 0..n_local {
                    offsets[i + 1] += offsets[i];
                }
                let mut fill = offsets.clone();
                let mut order = vec![0u32; e.dst.len()];
                for (i, &d) in e.dst.iter().enumerate() {
                    let l = local_of[d as usize] as usize;
                    order[fill[l]] = i as u32;
                    fill[l] += 1;
                }
                RelStore {
                    src: e.src,
                    dst: e.dst,
                    eids: e.eids,
                    weights: e.weights,
                    split: e.split,
                    offsets,
                    order,
                }
            })
            .collect();
        Ok(Self {
            part_id,
            meta,
            index,
            nodes,
            rels,
        })
    }

    /// Copy of this partition under `meta` with the input features of some
    /// node types replaced (one row per owned node).
    pub fn with_inputs(&self, meta: Arc<GraphMeta>, inputs: Vec<Option<FeatureMatrix>>) -> Result<Partition> {
        let mut nodes = self.nodes.clone();
        for (t, m) in inputs.into_iter().enumerate() {
            let Some(m) = m else { continue };
            let want = meta.node_types[t].input_dim();
            if m.rows != nodes[t].global_ids.len() || m.cols != want {
                return Err(Error::Shape(format!(
                    "replacement inputs for {} are {}x{}, expected {}x{want}",
                    meta.node_types[t].name,
                    m.rows,
                    m.cols,
                    nodes[t].global_ids.len()
                )));
            }
            nodes[t].inputs = m;
        }
        Ok(Partition {
            part_id: self.part_id,
            meta,
            index: self.index.clone(),
            nodes,
            rels: self.rels.clone(),
        })
    }

    pub fn num_parts(&self) -> usize {
        self.meta.num_parts
    }

    pub fn node_store(&self, node_type: usize) -> &NodeStore {
        &self.nodes[node_type]
    }

    pub fn rel(&self, rel: usize) -> &RelStore {
        &self.rels[rel]
    }

    pub fn owned_count(&self, node_type: usize) -> usize {
        self.nodes[node_type].global_ids.len()
    }

    pub fn global_ids(&self, node_type: usize) -> &[u64] {
        &self.nodes[node_type].global_ids
    }

    /// Owner partition of any global id; `None` if the id is out of range.
    pub fn owner(&self, node_type: usize, gid: u64) -> Option<usize> {
        self.index[node_type].owner.get(gid as usize).map(|&p| p as usize)
    }

    /// Local row of an owned node.
    pub fn local_id(&self, node_type: usize, gid: u64) -> Option<usize> {
        match self.owner(node_type, gid) {
            Some(p) if p == self.part_id => Some(self.index[node_type].local[gid as usize] as usize),
            _ => None,
        }
    }

    /// Owner-local row for any global id, whoever owns it.
    pub fn owner_local(&self, node_type: usize, gid: u64) -> usize {
        self.index[node_type].local[gid as usize] as usize
    }

    pub fn owner_index(&self, node_type: usize) -> &Arc<OwnerIndex> {
        &self.index[node_type]
    }

    pub fn halo(&self, node_type: usize) -> (&[u64], &[u32]) {
        let n = &self.nodes[node_type];
        (&n.halo_ids, &n.halo_owner)
    }

    /// Concatenated input features of locally owned nodes, in request order.
    pub fn local_inputs(&self, node_type: usize, gids: &[u64]) -> Result<FeatureMatrix> {
        let store = &self.nodes[node_type];
        let cols = store.inputs.cols;
        let mut out = FeatureMatrix::zeros(gids.len(), cols);
        for (i, &g) in gids.iter().enumerate() {
            let l = self.local_id(node_type, g).ok_or_else(|| {
                Error::invalid(format!(
                    "node {g} of type {} is not owned by partition {}",
                    self.meta.node_types[node_type].name, self.part_id
                ))
            })?;
            out.data[i * cols..(i + 1) * cols].copy_from_slice(store.inputs.row(l));
        }
        Ok(out)
    }

    pub fn labels(&self, node_type: usize) -> Option<&[i32]> {
        self.nodes[node_type].labels.as_deref()
    }

    pub fn split(&self, node_type: usize) -> Option<&SplitMasks> {
        self.nodes[node_type].split.as_ref()
    }
}

/// Loads the owner indexes shared by every partition of a manifest.
pub fn load_owner_index(manifest: &PartitionManifest, dir: &Path) -> Result<Vec<Arc<OwnerIndex>>> {
    (0..manifest.meta.node_types.len())
        .map(|t| {
            let owners = manifest.read_node_map(dir, t)?;
            if let Some(&p) = owners.iter().find(|&&p| p as usize >= manifest.num_parts) {
                return Err(Error::Manifest(format!("node map names partition {p} of {}", manifest.num_parts)));
            }
            Ok(Arc::new(OwnerIndex::from_owners(owners, manifest.num_parts)))
        })
        .collect()
}

/// Loads one partition from a manifest path.
pub fn load_partition(manifest_path: &Path, part_id: usize) -> Result<Partition> {
    let (manifest, dir) = PartitionManifest::load(manifest_path)?;
    let index = load_owner_index(&manifest, &dir)?;
    let data = load_partition_data(&manifest, &dir, part_id)?;
    Partition::from_data(Arc::new(manifest.meta.clone()), index, data)
}

/// Loads every partition of a manifest, sharing metadata and owner indexes.
pub fn load_all_partitions(manifest_path: &Path) -> Result<(PartitionManifest, Vec<Arc<Partition>>)> {
    let (manifest, dir) = PartitionManifest::load(manifest_path)?;
    let index = load_owner_index(&manifest, &dir)?;
    let meta = Arc::new(manifest.meta.clone());
    let parts = (0..manifest.num_parts)
        .map(|p| {
            let data = load_partition_data(&manifest, &dir, p)?;
            Partition::from_data(meta.clone(), index.clone(), data).map(Arc::new)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, parts))
}

/// Builds partitions straight from an in-memory shuffle, skipping disk.
pub fn partitions_in_memory(graph: super::PartitionedGraph) -> Result<Vec<Arc<Partition>>> {
    let num_parts = graph.meta.num_parts;
    let index: Vec<Arc<OwnerIndex>> = graph
        .assignment
        .per_type
        .into_iter()
        .map(|o| Arc::new(OwnerIndex::from_owners(o, num_parts)))
        .collect();
    let meta = Arc::new(graph.meta);
    graph
        .parts
        .into_iter()
        .map(|d| Partition::from_data(meta.clone(), index.clone(), d).map(Arc::new))
        .collect()
}
