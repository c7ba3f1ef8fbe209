//! Tabular input to typed graph: ingestion, feature transforms, string-to-integer
//! id mapping, edge remapping and split assignment.

mod construct;
pub mod graph;
pub mod idmap;
pub mod splits;
pub mod table;
pub mod transform;

pub use construct::{construct_graph, ingest_edge_table, ingest_node_table};
pub(crate) use construct::{edge_split, node_split};
pub use graph::{ConstructedGraph, EdgeData, GraphManifest, Labels, NamedFeature, NodeData};
pub use idmap::{build_id_map, remap_edges, NodeIdMap};
pub use splits::{assign_splits, SplitMasks};
pub use table::{ingest_table, Column, RawTable, StrColumn};
pub use transform::{transform_feature, FeatureMatrix, FittedStats};
