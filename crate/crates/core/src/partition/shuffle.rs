use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assign::PartitionAssignment;
use super::meta::GraphMeta;
use crate::error::{Error, Result};
use crate::gconstruct::graph::{FileEntry, MaskEntry};
use crate::gconstruct::{ConstructedGraph, FeatureMatrix, SplitMasks};
use crate::schema::GraphSchema;
use crate::util::binio;

/// Nodes of one type owned by one partition, sorted by global id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalNodes {
    pub global_ids: Vec<u64>,
    /// One matrix per feature, in metadata order, rows aligned with `global_ids`.
    pub features: Vec<FeatureMatrix>,
    pub labels: Option<Vec<i32>>,
    pub split: Option<SplitMasks>,
    /// Remote sources of locally owned edges, sorted, with their owners.
    pub halo_ids: Vec<u64>,
    pub halo_owner: Vec<u32>,
}

/// Edges of one relation owned by one partition (owner of the destination),
/// in global edge order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalEdges {
    pub src: Vec<u64>,
    pub dst: Vec<u64>,
    pub eids: Vec<u64>,
    pub weights: Option<Vec<f32>>,
    pub split: Option<SplitMasks>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionData {
    pub part_id: usize,
    pub nodes: Vec<LocalNodes>,
    pub edges: Vec<LocalEdges>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedGraph {
    pub meta: GraphMeta,
    pub schema: GraphSchema,
    pub assignment: PartitionAssignment,
    /// Raw ids per node type, in integer order.
    pub id_maps: Vec<Vec<String>>,
    pub parts: Vec<PartitionData>,
}

/// Routes every edge to the owner of its destination, co-locates node data
/// with owners and records halo nodes.
pub fn shuffle_to_partitions(graph: &ConstructedGraph, assignment: &PartitionAssignment) -> Result<PartitionedGraph> {
    let num_parts = assignment.num_parts;
    if assignment.per_type.len() != graph.nodes.len()
        || graph.nodes.iter().zip(&assignment.per_type).any(|(n, a)| a.len() != n.count())
    {
        return Err(Error::invalid("assignment does not cover every node"));
    }
    if let Some(p) = assignment.per_type.iter().flatten().find(|&&p| p as usize >= num_parts) {
        return Err(Error::invalid(format!("assignment names partition {p} of {num_parts}")));
    }
    let meta = GraphMeta::from_graph(graph, num_parts);

    // Node and edge indices per partition, in global order.
    let node_buckets: Vec<Vec<Vec<usize>>> = assignment
        .per_type
        .iter()
        .map(|owners| bucket(owners.iter().map(|&p| p as usize), num_parts))
        .collect();
    let edge_buckets: Vec<Vec<Vec<usize>>> = graph
        .edges
        .iter()
        .zip(&meta.relations)
        .map(|(e, rm)| {
            let owners = &assignment.per_type[rm.dst_type];
            bucket(e.dst.iter().map(|&d| owners[d as usize] as usize), num_parts)
        })
        .collect();

    let parts = (0..num_parts)
        .into_par_iter()
        .map(|p| {
            let edges: Vec<LocalEdges> = graph
                .edges
                .iter()
                .zip(&edge_buckets)
                .map(|(e, buckets)| {
                    let idx = &buckets[p];
                    LocalEdges {
                        src: idx.iter().map(|&i| e.src[i]).collect(),
                        dst: idx.iter().map(|&i| e.dst[i]).collect(),
                        eids: idx.iter().map(|&i| i as u64).collect(),
                        weights: e.weights.as_ref().map(|w| idx.iter().map(|&i| w[i]).collect()),
                        split: e.split.as_ref().map(|s| s.gather(idx)),
                    }
                })
                .collect();

            // Owner of each remote source node, u32::MAX when not a halo node.
            let mut halo_mark: Vec<Vec<u32>> = graph.nodes.iter().map(|n| vec![u32::MAX; n.count()]).collect();
            for (local, rm) in edges.iter().zip(&meta.relations) {
                let owners = &assignment.per_type[rm.src_type];
                for &s in &local.src {
                    let owner = owners[s as usize];
                    if owner as usize != p {
                        halo_mark[rm.src_type][s as usize] = owner;
                    }
                }
            }
            let halo = halo_mark.into_iter().map(|mark| {
                mark.into_iter()
                    .enumerate()
                    .filter(|&(_, o)| o != u32::MAX)
                    .map(|(g, o)| (g as u64, o))
                    .unzip::<u64, u32, Vec<u64>, Vec<u32>>()
            });

            let nodes = graph
                .nodes
                .iter()
                .zip(&node_buckets)
                .zip(halo)
                .map(|((n, buckets), halo)| {
                    let idx = &buckets[p];
                    LocalNodes {
                        global_ids: idx.iter().map(|&i| i as u64).collect(),
                        features: n.features.iter().map(|f| f.matrix.gather(idx.iter().copied())).collect(),
                        labels: n.labels.as_ref().map(|l| idx.iter().map(|&i| l.values[i]).collect()),
                        split: n.split.as_ref().map(|s| s.gather(idx)),
                        halo_ids: halo.0,
                        halo_owner: halo.1,
                    }
                })
                .collect();
            PartitionData { part_id: p, nodes, edges }
        })
        .collect();

    Ok(PartitionedGraph {
        meta,
        schema: graph.schema.clone(),
        assignment: assignment.clone(),
        id_maps: graph.nodes.iter().map(|n| n.ids.ids().to_vec()).collect(),
        parts,
    })
}

fn bucket(owners: impl Iterator<Item = usize>, num_parts: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); num_parts];
    for (i, p) in owners.enumerate() {
        out[p].push(i);
    }
    out
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartNodeEntry {
    pub owned: usize,
    pub halo: usize,
    pub l2g: FileEntry,
    pub features: Vec<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<MaskEntry>,
    pub halo_ids: FileEntry,
    pub halo_owner: FileEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartRelEntry {
    pub owned: usize,
    pub edges: FileEntry,
    pub eids: FileEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<MaskEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartEntry {
    pub part_id: usize,
    pub dir: String,
    pub node_types: Vec<PartNodeEntry>,
    pub relations: Vec<PartRelEntry>,
}

/// Top-level partition manifest, `<graph_name>.json` in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub graph_name: String,
    pub num_parts: usize,
    pub meta: GraphMeta,
    pub schema: GraphSchema,
    /// Raw-string id files per node type.
    pub id_maps: Vec<FileEntry>,
    /// Owner partition (u32) of every node, per node type.
    pub node_maps: Vec<FileEntry>,
    pub partitions: Vec<PartEntry>,
}

impl PartitionManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let manifest: Self = binio::read_json(path)?;
        if manifest.partitions.len() != manifest.num_parts {
            return Err(Error::Manifest(format!(
                "{} partition entries for num_parts {}",
                manifest.partitions.len(),
                manifest.num_parts
            )));
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, dir))
    }

    pub fn read_id_map(&self, dir: &Path, node_type: usize) -> Result<Vec<String>> {
        let ids = self.id_maps[node_type].read_lines(dir)?;
        if ids.len() != self.meta.node_types[node_type].count {
            return Err(Error::Manifest(format!("id map for {} has {} entries", self.meta.node_types[node_type].name, ids.len())));
        }
        Ok(ids)
    }

    pub fn read_node_map(&self, dir: &Path, node_type: usize) -> Result<Vec<u32>> {
        self.node_maps[node_type].read_u32s(dir, self.meta.node_types[node_type].count)
    }
}

impl PartitionedGraph {
    /// Writes partitions and the manifest; returns the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let meta = &self.meta;
        let mut id_maps = Vec::new();
        let mut node_maps = Vec::new();
        for (t, nt) in meta.node_types.iter().enumerate() {
            id_maps.push(FileEntry::write(dir, format!("id_maps/{}.txt", nt.name), |p| binio::write_lines(p, &self.id_maps[t]))?);
            node_maps.push(FileEntry::write(dir, format!("node_map/{}.bin", nt.name), |p| binio::write_u32s(p, &self.assignment.per_type[t]))?);
        }
        let partitions = self
            .parts
            .par_iter()
            .map(|part| write_part(dir, meta, part))
            .collect::<Result<Vec<_>>>()?;
        let manifest = PartitionManifest {
            graph_name: meta.graph_name.clone(),
            num_parts: meta.num_parts,
            meta: meta.clone(),
            schema: self.schema.clone(),
            id_maps,
            node_maps,
            partitions,
        };
        let path = dir.join(format!("{}.json", meta.graph_name));
        binio::write_json(&path, &manifest)?;
        Ok(path)
    }
}

fn write_part(dir: &Path, meta: &GraphMeta, part: &PartitionData) -> Result<PartEntry> {
    let pdir = format!("part{}", part.part_id);
    let mut node_types = Vec::new();
    for (nt, local) in meta.node_types.iter().zip(&part.nodes) {
        let stem = format!("{pdir}/nodes/{}", nt.name);
        node_types.push(PartNodeEntry {
            owned: local.global_ids.len(),
            halo: local.halo_ids.len(),
            l2g: FileEntry::write(dir, format!("{stem}.l2g.bin"), |p| binio::write_u64s(p, &local.global_ids))?,
            features: nt
                .features
                .iter()
                .zip(&local.features)
                .map(|(f, m)| FileEntry::write_matrix(dir, format!("{stem}.feat.{}.bin", f.name), m))
                .collect::<Result<_>>()?,
            labels: local
                .labels
                .as_ref()
                .map(|l| FileEntry::write(dir, format!("{stem}.labels.bin"), |p| binio::write_i32s(p, l)))
                .transpose()?,
            masks: local.split.as_ref().map(|m| MaskEntry::write(dir, &stem, m)).transpose()?,
            halo_ids: FileEntry::write(dir, format!("{stem}.halo.bin"), |p| binio::write_u64s(p, &local.halo_ids))?,
            halo_owner: FileEntry::write(dir, format!("{stem}.halo_owner.bin"), |p| binio::write_u32s(p, &local.halo_owner))?,
        });
    }
    let mut relations = Vec::new();
    for (rm, local) in meta.relations.iter().zip(&part.edges) {
        let stem = format!("{pdir}/edges/{}", rm.relation.file_stem());
        relations.push(PartRelEntry {
            owned: local.src.len(),
            edges: FileEntry::write_pairs(dir, format!("{stem}.edges.bin"), &local.src, &local.dst)?,
            eids: FileEntry::write(dir, format!("{stem}.eids.bin"), |p| binio::write_u64s(p, &local.eids))?,
            weights: local
                .weights
                .as_ref()
                .map(|w| FileEntry::write(dir, format!("{stem}.weights.bin"), |p| binio::write_f32_matrix(p, w.len(), 1, w)))
                .transpose()?,
            masks: local.split.as_ref().map(|m| MaskEntry::write(dir, &stem, m)).transpose()?,
        });
    }
    Ok(PartEntry {
        part_id: part.part_id,
        dir: pdir,
        node_types,
        relations,
    })
}

/// Reads one partition's files, verifying sizes and checksums against the manifest.
pub fn load_partition_data(manifest: &PartitionManifest, dir: &Path, part_id: usize) -> Result<PartitionData> {
    let entry = manifest
        .partitions
        .get(part_id)
        .ok_or_else(|| Error::Manifest(format!("no partition {part_id} (num_parts {})", manifest.num_parts)))?;
    let meta = &manifest.meta;
    if entry.node_types.len() != meta.node_types.len() || entry.relations.len() != meta.relations.len() {
        return Err(Error::Manifest(format!("partition {part_id} type lists disagree with metadata")));
    }
    let mut nodes = Vec::new();
    for (nt, e) in meta.node_types.iter().zip(&entry.node_types) {
        if e.features.len() != nt.features.len() {
            return Err(Error::Manifest(format!("partition {part_id}/{}: feature count mismatch", nt.name)));
        }
        nodes.push(LocalNodes {
            global_ids: e.l2g.read_u64s(dir, e.owned)?,
            features: nt
                .features
                .iter()
                .zip(&e.features)
                .map(|(f, fe)| fe.read_matrix(dir, e.owned, f.dim))
                .collect::<Result<_>>()?,
            labels: e
                .labels
                .as_ref()
                .map(|l| {
                    let v = binio::read_i32s(&l.verify(dir)?)?;
                    if v.len() != e.owned {
                        return Err(Error::Manifest(format!("{}: {} labels for {} nodes", l.file, v.len(), e.owned)));
                    }
                    Ok(v)
                })
                .transpose()?,
            split: e.masks.as_ref().map(|m| m.read(dir, e.owned)).transpose()?,
            halo_ids: e.halo_ids.read_u64s(dir, e.halo)?,
            halo_owner: e.halo_owner.read_u32s(dir, e.halo)?,
        });
    }
    let mut edges = Vec::new();
    for e in &entry.relations {
        let (src, dst) = e.edges.read_pairs(dir, e.owned)?;
        edges.push(LocalEdges {
            src,
            dst,
            eids: e.eids.read_u64s(dir, e.owned)?,
            weights: e
                .weights
                .as_ref()
                .map(|w| w.read_matrix(dir, e.owned, 1).map(|m| m.data))
                .transpose()?,
            split: e.masks.as_ref().map(|m| m.read(dir, e.owned)).transpose()?,
        });
    }
    Ok(PartitionData { part_id, nodes, edges })
}
