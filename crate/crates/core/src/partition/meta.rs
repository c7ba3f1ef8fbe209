use serde::{Deserialize, Serialize};

use crate::gconstruct::{ConstructedGraph, FittedStats};
use crate::schema::RelationType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub dim: usize,
    pub stats: FittedStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTypeMeta {
    pub name: String,
    pub count: usize,
    pub features: Vec<FeatureMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_vocab: Option<Vec<String>>,
    pub has_split: bool,
}

impl NodeTypeMeta {
    pub fn input_dim(&self) -> usize {
        self.features.iter().map(|f| f.dim).sum()
    }

    pub fn is_featureless(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMeta {
    pub relation: RelationType,
    pub src_type: usize,
    pub dst_type: usize,
    pub count: usize,
    pub has_weights: bool,
    pub has_split: bool,
}

/// Global facts every worker needs: types, counts, feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub graph_name: String,
    pub num_parts: usize,
    pub node_types: Vec<NodeTypeMeta>,
    pub relations: Vec<RelationMeta>,
}

impl GraphMeta {
    pub fn from_graph(graph: &ConstructedGraph, num_parts: usize) -> Self {
        let node_types = graph
            .nodes
            .iter()
            .map(|n| NodeTypeMeta {
                name: n.node_type.clone(),
                count: n.count(),
                features: n
                    .features
                    .iter()
                    .map(|f| FeatureMeta {
                        name: f.name.clone(),
                        dim: f.matrix.cols,
                        stats: f.stats.clone(),
                    })
                    .collect(),
                num_classes: n.labels.as_ref().map(|l| l.num_classes),
                label_vocab: n.labels.as_ref().and_then(|l| l.vocab.clone()),
                has_split: n.split.is_some(),
            })
            .collect();
        let relations = graph
            .edges
            .iter()
            .map(|e| RelationMeta {
                relation: e.relation.clone(),
                src_type: graph.node_type_index(&e.relation.src_type).expect("validated"),
                dst_type: graph.node_type_index(&e.relation.dst_type).expect("validated"),
                count: e.count(),
                has_weights: e.weights.is_some(),
                has_split: e.split.is_some(),
            })
            .collect();
        Self {
            graph_name: graph.name.clone(),
            num_parts,
            node_types,
            relations,
        }
    }

    pub fn node_type(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|n| n.name == name)
    }

    pub fn relation(&self, rel: &RelationType) -> Option<usize> {
        self.relations.iter().position(|r| &r.relation == rel)
    }

    /// Relations whose endpoint types are the reverse of `rel`'s.
    pub fn reverse_relations(&self, rel: usize) -> Vec<usize> {
        let r = &self.relations[rel];
        (0..self.relations.len())
            .filter(|&i| self.relations[i].src_type == r.dst_type && self.relations[i].dst_type == r.src_type)
            .collect()
    }
}
