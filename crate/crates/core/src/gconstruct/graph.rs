//! In-memory constructed graph and its chunked on-disk format.
//!
//! Layout under the output directory:
//!
//! ```text
//! graph.json                      manifest (counts, relations, features, digests)
//! nodes/<type>.ids.txt            raw ids in integer order
//! nodes/<type>.feat.<name>.bin    float32 matrix with (rows, cols) header
//! nodes/<type>.labels.bin         i32 class per node, -1 when unlabeled
//! nodes/<type>.<split>.mask       one byte per node
//! edges/<s>__<r>__<d>.edges.bin   u64 (src, dst) pairs
//! edges/<s>__<r>__<d>.weights.bin float32 (count, 1) matrix
//! edges/<s>__<r>__<d>.<split>.mask
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::idmap::NodeIdMap;
use super::splits::SplitMasks;
use super::transform::{FeatureMatrix, FittedStats};
use crate::error::{Error, Result};
use crate::schema::{GraphSchema, RelationType};
use crate::util::binio::{self, FileDigest};

#[derive(Debug, Clone, PartialEq)]
pub struct NamedFeature {
    pub name: String,
    pub matrix: FeatureMatrix,
    pub stats: FittedStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    /// Class index per entity, `-1` when unlabeled.
    pub values: Vec<i32>,
    pub num_classes: usize,
    /// Original label strings when they were not plain integers.
    pub vocab: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeData {
    pub node_type: String,
    pub ids: NodeIdMap,
    pub features: Vec<NamedFeature>,
    pub labels: Option<Labels>,
    pub split: Option<SplitMasks>,
}

impl NodeData {
    pub fn count(&self) -> usize {
        self.ids.len()
    }

    /// Width of all features concatenated in declaration order.
    pub fn input_dim(&self) -> usize {
        self.features.iter().map(|f| f.matrix.cols).sum()
    }

    pub fn is_featureless(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeData {
    pub relation: RelationType,
    pub src: Vec<u64>,
    pub dst: Vec<u64>,
    pub weights: Option<Vec<f32>>,
    pub split: Option<SplitMasks>,
}

impl EdgeData {
    pub fn count(&self) -> usize {
        self.src.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedGraph {
    pub name: String,
    pub schema: GraphSchema,
    pub nodes: Vec<NodeData>,
    pub edges: Vec<EdgeData>,
}

impl ConstructedGraph {
    pub fn node_type_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.node_type == name)
    }

    pub fn relation_index(&self, rel: &RelationType) -> Option<usize> {
        self.edges.iter().position(|e| &e.relation == rel)
    }

    pub fn save(&self, dir: &Path) -> Result<GraphManifest> {
        let mut node_types = Vec::new();
        for node in &self.nodes {
            let stem = format!("nodes/{}", node.node_type);
            let id_file = FileEntry::write(dir, format!("{stem}.ids.txt"), |p| binio::write_lines(p, node.ids.ids()))?;
            let features = node
                .features
                .iter()
                .map(|f| {
                    Ok(FeatureEntry {
                        name: f.name.clone(),
                        dim: f.matrix.cols,
                        file: FileEntry::write_matrix(dir, format!("{stem}.feat.{}.bin", f.name), &f.matrix)?,
                        stats: f.stats.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let labels = node
                .labels
                .as_ref()
                .map(|l| LabelEntry::write(dir, format!("{stem}.labels.bin"), l))
                .transpose()?;
            let masks = node.split.as_ref().map(|m| MaskEntry::write(dir, &stem, m)).transpose()?;
            node_types.push(NodeEntry {
                name: node.node_type.clone(),
                count: node.count(),
                id_file,
                features,
                labels,
                masks,
            });
        }
        let mut relations = Vec::new();
        for edge in &self.edges {
            let stem = format!("edges/{}", edge.relation.file_stem());
            relations.push(RelationEntry {
                relation: edge.relation.clone(),
                count: edge.count(),
                edges: FileEntry::write_pairs(dir, format!("{stem}.edges.bin"), &edge.src, &edge.dst)?,
                weights: edge
                    .weights
                    .as_ref()
                    .map(|w| FileEntry::write(dir, format!("{stem}.weights.bin"), |p| binio::write_f32_matrix(p, w.len(), 1, w)))
                    .transpose()?,
                masks: edge.split.as_ref().map(|m| MaskEntry::write(dir, &stem, m)).transpose()?,
            });
        }
        let manifest = GraphManifest {
            graph_name: self.name.clone(),
            schema: self.schema.clone(),
            node_types,
            relations,
        };
        binio::write_json(&dir.join(GRAPH_MANIFEST), &manifest)?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: GraphManifest = binio::read_json(&dir.join(GRAPH_MANIFEST))?;
        let mut nodes = Vec::new();
        for entry in &manifest.node_types {
            let ids = NodeIdMap::from_ids(&entry.name, entry.id_file.read_lines(dir)?)?;
            if ids.len() != entry.count {
                return Err(Error::Manifest(format!("{}: {} ids, manifest says {}", entry.name, ids.len(), entry.count)));
            }
            let features = entry
                .features
                .iter()
                .map(|f| {
                    Ok(NamedFeature {
                        name: f.name.clone(),
                        matrix: f.file.read_matrix(dir, entry.count, f.dim)?,
                        stats: f.stats.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            nodes.push(NodeData {
                node_type: entry.name.clone(),
                ids,
                features,
                labels: entry.labels.as_ref().map(|l| l.read(dir, entry.count)).transpose()?,
                split: entry.masks.as_ref().map(|m| m.read(dir, entry.count)).transpose()?,
            });
        }
        let mut edges = Vec::new();
        for entry in &manifest.relations {
            let (src, dst) = entry.edges.read_pairs(dir, entry.count)?;
            edges.push(EdgeData {
                relation: entry.relation.clone(),
                src,
                dst,
                weights: entry
                    .weights
                    .as_ref()
                    .map(|w| w.read_matrix(dir, entry.count, 1).map(|m| m.data))
                    .transpose()?,
                split: entry.masks.as_ref().map(|m| m.read(dir, entry.count)).transpose()?,
            });
        }
        Ok(Self {
            name: manifest.graph_name,
            schema: manifest.schema,
            nodes,
            edges,
        })
    }
}

pub const GRAPH_MANIFEST: &str = "graph.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphManifest {
    pub graph_name: String,
    pub schema: GraphSchema,
    pub node_types: Vec<NodeEntry>,
    pub relations: Vec<RelationEntry>,
}

/// A file relative to the manifest directory, with its expected digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    #[serde(flatten)]
    pub digest: FileDigest,
}

impl FileEntry {
    pub fn write(dir: &Path, rel: String, write: impl FnOnce(&Path) -> Result<FileDigest>) -> Result<Self> {
        let digest = write(&dir.join(&rel))?;
        Ok(Self { file: rel, digest })
    }

    pub fn write_matrix(dir: &Path, rel: String, m: &FeatureMatrix) -> Result<Self> {
        Self::write(dir, rel, |p| binio::write_f32_matrix(p, m.rows, m.cols, &m.data))
    }

    pub fn write_pairs(dir: &Path, rel: String, src: &[u64], dst: &[u64]) -> Result<Self> {
        let interleaved: Vec<u64> = src.iter().zip(dst).flat_map(|(&s, &d)| [s, d]).collect();
        Self::write(dir, rel, |p| binio::write_u64s(p, &interleaved))
    }

    /// Checks size and CRC against the manifest before use.
    pub fn verify(&self, dir: &Path) -> Result<std::path::PathBuf> {
        let path = dir.join(&self.file);
        let actual = binio::digest_file(&path)?;
        if actual != self.digest {
            return Err(Error::Manifest(format!(
                "{}: expected {} bytes crc {:08x}, found {} bytes crc {:08x}",
                self.file, self.digest.bytes, self.digest.crc32, actual.bytes, actual.crc32
            )));
        }
        Ok(path)
    }

    pub fn read_matrix(&self, dir: &Path, rows: usize, cols: usize) -> Result<FeatureMatrix> {
        let (r, c, data) = binio::read_f32_matrix(&self.verify(dir)?)?;
        if (r, c) != (rows, cols) {
            return Err(Error::Manifest(format!("{}: shape {r}x{c}, manifest says {rows}x{cols}", self.file)));
        }
        Ok(FeatureMatrix::new(r, c, data))
    }

    pub fn read_pairs(&self, dir: &Path, count: usize) -> Result<(Vec<u64>, Vec<u64>)> {
        let flat = binio::read_u64s(&self.verify(dir)?)?;
        if flat.len() != 2 * count {
            return Err(Error::Manifest(format!("{}: {} edges, manifest says {count}", self.file, flat.len() / 2)));
        }
        Ok(flat.chunks_exact(2).map(|p| (p[0], p[1])).unzip())
    }

    pub fn read_u64s(&self, dir: &Path, count: usize) -> Result<Vec<u64>> {
        let v = binio::read_u64s(&self.verify(dir)?)?;
        check_len(&self.file, v.len(), count)?;
        Ok(v)
    }

    pub fn read_u32s(&self, dir: &Path, count: usize) -> Result<Vec<u32>> {
        let v = binio::read_u32s(&self.verify(dir)?)?;
        check_len(&self.file, v.len(), count)?;
        Ok(v)
    }

    pub fn read_lines(&self, dir: &Path) -> Result<Vec<String>> {
        binio::read_lines(&self.verify(dir)?)
    }

    fn read_mask(&self, dir: &Path, count: usize) -> Result<Vec<bool>> {
        let v = binio::read_mask(&self.verify(dir)?)?;
        check_len(&self.file, v.len(), count)?;
        Ok(v)
    }
}

fn check_len(file: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Manifest(format!("{file}: {got} entries, manifest says {want}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub name: String,
    pub dim: usize,
    pub file: FileEntry,
    pub stats: FittedStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub file: FileEntry,
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<Vec<String>>,
}

impl LabelEntry {
    pub fn write(dir: &Path, rel: String, labels: &Labels) -> Result<Self> {
        Ok(Self {
            file: FileEntry::write(dir, rel, |p| binio::write_i32s(p, &labels.values))?,
            num_classes: labels.num_classes,
            vocab: labels.vocab.clone(),
        })
    }

    pub fn read(&self, dir: &Path, count: usize) -> Result<Labels> {
        let values = binio::read_i32s(&self.file.verify(dir)?)?;
        check_len(&self.file.file, values.len(), count)?;
        Ok(Labels {
            values,
            num_classes: self.num_classes,
            vocab: self.vocab.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub train: FileEntry,
    pub val: FileEntry,
    pub test: FileEntry,
}

impl MaskEntry {
    pub fn write(dir: &Path, stem: &str, m: &SplitMasks) -> Result<Self> {
        Ok(Self {
            train: FileEntry::write(dir, format!("{stem}.train.mask"), |p| binio::write_mask(p, &m.train))?,
            val: FileEntry::write(dir, format!("{stem}.val.mask"), |p| binio::write_mask(p, &m.val))?,
            test: FileEntry::write(dir, format!("{stem}.test.mask"), |p| binio::write_mask(p, &m.test))?,
        })
    }

    pub fn read(&self, dir: &Path, count: usize) -> Result<SplitMasks> {
        Ok(SplitMasks {
            train: self.train.read_mask(dir, count)?,
            val: self.val.read_mask(dir, count)?,
            test: self.test.read_mask(dir, count)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub name: String,
    pub count: usize,
    pub id_file: FileEntry,
    pub features: Vec<FeatureEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<MaskEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub relation: RelationType,
    pub count: usize,
    pub edges: FileEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<MaskEntry>,
}
