//! Synthetic graphs: an in-memory builder, CSV export that round-trips
//! through construction, and planted-structure generators for experiments.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gconstruct::{edge_split, node_split, ConstructedGraph, EdgeData, FeatureMatrix, FittedStats, Labels, NamedFeature, NodeData, NodeIdMap};
use crate::schema::{
    EdgeSpec, FeatureSpec, FileFormat, FormatSpec, GraphSchema, LabelSpec, LabelTask, NodeSpec, RelationType, TransformKind, TransformSpec,
    SCHEMA_VERSION,
};
use crate::util::DrawRng;

/// Builds a [`ConstructedGraph`] with raw ids `"{type}{i}"` and a matching schema.
#[derive(Debug)]
pub struct GraphBuilder {
    name: String,
    seed: u64,
    nodes: Vec<NodeData>,
    node_specs: Vec<NodeSpec>,
    edges: Vec<EdgeData>,
    edge_specs: Vec<EdgeSpec>,
}

fn csv() -> FormatSpec {
    FormatSpec { name: FileFormat::Csv }
}

impl GraphBuilder {
    pub fn new(name: &str, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            seed,
            nodes: Vec::new(),
            node_specs: Vec::new(),
            edges: Vec::new(),
            edge_specs: Vec::new(),
        }
    }

    fn node_index(&self, node_type: &str) -> usize {
        self.nodes
            .iter()
            .position(|n| n.node_type == node_type)
            .unwrap_or_else(|| panic!("node type {node_type} not declared"))
    }

    pub fn node_type(mut self, name: &str, count: usize) -> Self {
        let ids = (0..count).map(|i| format!("{name}{i}")).collect();
        self.nodes.push(NodeData {
            node_type: name.to_string(),
            ids: NodeIdMap::from_ids(name, ids).expect("generated ids are distinct"),
            features: Vec::new(),
            labels: None,
            split: None,
        });
        self.node_specs.push(NodeSpec {
            node_type: name.to_string(),
            format: csv(),
            files: vec![format!("nodes_{name}.csv")],
            node_id_col: "id".into(),
            features: Vec::new(),
            labels: Vec::new(),
        });
        self
    }

    /// Adds a pass-through float-vector feature.
    pub fn feature(mut self, node_type: &str, name: &str, matrix: FeatureMatrix) -> Self {
        let t = self.node_index(node_type);
        assert_eq!(matrix.rows, self.nodes[t].count(), "feature rows for {node_type}");
        self.nodes[t].features.push(NamedFeature {
            name: name.to_string(),
            stats: FittedStats::FloatVector { width: matrix.cols },
            matrix,
        });
        self.node_specs[t].features.push(FeatureSpec {
            feature_col: name.to_string(),
            feature_name: None,
            transform: TransformSpec {
                name: TransformKind::FloatVector,
            },
        });
        self
    }

    /// Classification labels (`-1` = unlabeled) with splits over labeled nodes.
    pub fn labels(mut self, node_type: &str, values: Vec<i32>, split_pct: [f64; 3]) -> Self {
        let t = self.node_index(node_type);
        assert_eq!(values.len(), self.nodes[t].count(), "label count for {node_type}");
        let num_classes = values.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
        self.nodes[t].split = Some(node_split(&values, split_pct, self.seed, node_type));
        self.nodes[t].labels = Some(Labels {
            values,
            num_classes,
            vocab: None,
        });
        self.node_specs[t].labels.push(LabelSpec {
            label_col: Some("label".into()),
            task_type: LabelTask::Classification,
            split_pct,
        });
        self
    }

    pub fn relation(mut self, src_type: &str, name: &str, dst_type: &str, src: Vec<u64>, dst: Vec<u64>) -> Self {
        assert_eq!(src.len(), dst.len());
        let (s, d) = (self.node_index(src_type), self.node_index(dst_type));
        let (ns, nd) = (self.nodes[s].count() as u64, self.nodes[d].count() as u64);
        assert!(src.iter().all(|&x| x < ns) && dst.iter().all(|&x| x < nd), "edge endpoint out of range");
        let relation = RelationType::new(src_type, name, dst_type);
        self.edge_specs.push(EdgeSpec {
            relation: relation.clone(),
            format: csv(),
            files: vec![format!("edges_{}.csv", relation.file_stem())],
            source_id_col: "src".into(),
            dest_id_col: "dst".into(),
            labels: Vec::new(),
            weight_col: None,
        });
        self.edges.push(EdgeData {
            relation,
            src,
            dst,
            weights: None,
            split: None,
        });
        self
    }

    fn last_relation(&mut self, name: &str) -> usize {
        self.edges
            .iter()
            .rposition(|e| e.relation.name == name)
            .unwrap_or_else(|| panic!("relation {name} not declared"))
    }

    /// Marks a relation as a link-prediction target with the given split.
    pub fn lp_split(mut self, rel_name: &str, split_pct: [f64; 3]) -> Self {
        let r = self.last_relation(rel_name);
        let e = &mut self.edges[r];
        e.split = Some(edge_split(e.src.len(), split_pct, self.seed, &e.relation));
        self.edge_specs[r].labels.push(LabelSpec {
            label_col: None,
            task_type: LabelTask::LinkPrediction,
            split_pct,
        });
        self
    }

    pub fn weights(mut self, rel_name: &str, weights: Vec<f32>) -> Self {
        let r = self.last_relation(rel_name);
        assert_eq!(weights.len(), self.edges[r].src.len());
        self.edges[r].weights = Some(weights);
        self.edge_specs[r].weight_col = Some("weight".into());
        self
    }

    pub fn build(self) -> ConstructedGraph {
        let schema = GraphSchema {
            version: SCHEMA_VERSION.to_string(),
            nodes: self.node_specs,
            edges: self.edge_specs,
        };
        schema.validate().expect("builder produces a valid schema");
        ConstructedGraph {
            name: self.name,
            schema,
            nodes: self.nodes,
            edges: self.edges,
        }
    }
}

/// Writes the graph as CSV files plus `schema.json` under `dir`. Constructing
/// from that schema with the builder's seed reproduces the graph.
pub fn write_csv_dataset(graph: &ConstructedGraph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (node, spec) in graph.nodes.iter().zip(&graph.schema.nodes) {
        let path = dir.join(&spec.files[0]);
        let mut out = BufWriter::with_capacity(1 << 20, File::create(&path).map_err(|e| Error::io(&path, e))?);
        let mut header = vec![spec.node_id_col.clone()];
        header.extend(spec.features.iter().map(|f| f.feature_col.clone()));
        if let Some(col) = spec.labels.first().and_then(|l| l.label_col.clone()) {
            header.push(col);
        }
        let mut line = header.join(",");
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(|e| Error::io(&path, e))?;
        let mut buf = String::new();
        for i in 0..node.count() {
            buf.clear();
            buf.push_str(node.ids.reverse(i as u64).expect("dense ids"));
            for f in &node.features {
                buf.push(',');
                for (k, x) in f.matrix.row(i).iter().enumerate() {
                    if k > 0 {
                        buf.push(';');
                    }
                    buf.push_str(&x.to_string());
                }
            }
            if let Some(l) = &node.labels {
                buf.push(',');
                if l.values[i] >= 0 {
                    buf.push_str(&l.values[i].to_string());
                }
            }
            buf.push('\n');
            out.write_all(buf.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
    }
    for (edge, spec) in graph.edges.iter().zip(&graph.schema.edges) {
        let path = dir.join(&spec.files[0]);
        let (s, d) = (
            &graph.nodes[graph.node_type_index(&edge.relation.src_type).expect("declared")],
            &graph.nodes[graph.node_type_index(&edge.relation.dst_type).expect("declared")],
        );
        let mut out = BufWriter::with_capacity(1 << 20, File::create(&path).map_err(|e| Error::io(&path, e))?);
        let header = match &spec.weight_col {
            Some(w) => format!("{},{},{w}\n", spec.source_id_col, spec.dest_id_col),
            None => format!("{},{}\n", spec.source_id_col, spec.dest_id_col),
        };
        out.write_all(header.as_bytes()).map_err(|e| Error::io(&path, e))?;
        for i in 0..edge.count() {
            let su = s.ids.reverse(edge.src[i]).expect("dense ids");
            let dv = d.ids.reverse(edge.dst[i]).expect("dense ids");
            let row = match &edge.weights {
                Some(w) => format!("{su},{dv},{}\n", w[i]),
                None => format!("{su},{dv}\n"),
            };
            out.write_all(row.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
    }
    let schema_path = dir.join("schema.json");
    std::fs::write(&schema_path, graph.schema.to_json()).map_err(|e| Error::io(&schema_path, e))
}

/// Standard-normal matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut DrawRng) -> FeatureMatrix {
    FeatureMatrix::new(rows, cols, (0..rows * cols).map(|_| gaussian(rng) as f32).collect())
}

pub fn gaussian(rng: &mut DrawRng) -> f64 {
    let u1 = rng.uniform().max(f64::MIN_POSITIVE);
    let u2 = rng.uniform();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform random edges between two id ranges.
pub fn random_edges(num_src: usize, num_dst: usize, count: usize, rng: &mut DrawRng) -> (Vec<u64>, Vec<u64>) {
    (0..count)
        .map(|_| (rng.index(num_src) as u64, rng.index(num_dst) as u64))
        .unzip()
}

/// Single-type graph with random features and edges, plus an LP split on its relation.
pub fn random_graph(nodes: usize, edges: usize, feat_dim: usize, lp_split: [f64; 3], seed: u64) -> ConstructedGraph {
    let mut rng = DrawRng::new(seed);
    let feat = gaussian_matrix(nodes, feat_dim, &mut rng);
    let (src, dst) = random_edges(nodes, nodes, edges, &mut rng);
    GraphBuilder::new("graph", seed)
        .node_type("node", nodes)
        .feature("node", "feat", feat)
        .relation("node", "link", "node", src, dst)
        .lp_split("link", lp_split)
        .build()
}

/// Two-color graph for node classification: node `v` has a one-hot color
/// feature and exactly `degree` random in-neighbors (`degree` odd); its label
/// is the majority color among those in-neighbors.
pub fn planted_majority(nodes: usize, degree: usize, seed: u64) -> ConstructedGraph {
    assert!(degree % 2 == 1, "odd degree avoids ties");
    let mut rng = DrawRng::new(seed);
    let colors: Vec<usize> = (0..nodes).map(|_| rng.index(2)).collect();
    let mut feat = FeatureMatrix::zeros(nodes, 2);
    for (v, &c) in colors.iter().enumerate() {
        feat.data[v * 2 + c] = 1.0;
    }
    let (mut src, mut dst) = (Vec::new(), Vec::new());
    let mut labels = Vec::with_capacity(nodes);
    for v in 0..nodes {
        let mut ones = 0;
        for _ in 0..degree {
            let u = rng.index(nodes);
            ones += colors[u];
            src.push(u as u64);
            dst.push(v as u64);
        }
        labels.push(i32::from(2 * ones > degree));
    }
    GraphBuilder::new("majority", seed)
        .node_type("item", nodes)
        .feature("item", "color", feat)
        .labels("item", labels, [0.6, 0.2, 0.2])
        .relation("item", "link", "item", src, dst)
        .build()
}

/// Bipartite `user -buys-> item` graph with planted communities.
#[derive(Debug, Clone)]
pub struct PlantedBipartite {
    pub users: usize,
    pub items: usize,
    pub communities: usize,
    pub edges: usize,
    /// Fraction of edges whose item is drawn from any community.
    pub noise: f64,
    pub feat_dim: usize,
    /// Standard deviation of per-node noise around the community centroid.
    pub feat_noise: f64,
    pub seed: u64,
}

impl PlantedBipartite {
    /// Community of user or item `i` when `n` nodes share `communities` blocks.
    pub fn community(&self, i: usize, n: usize) -> usize {
        i * self.communities / n
    }

    fn features(&self, n: usize, centroids: &FeatureMatrix, rng: &mut DrawRng) -> FeatureMatrix {
        let d = self.feat_dim;
        let mut m = FeatureMatrix::zeros(n, d);
        for i in 0..n {
            let c = self.community(i, n);
            for k in 0..d {
                m.data[i * d + k] = centroids.data[c * d + k] + (self.feat_noise * gaussian(rng)) as f32;
            }
        }
        m
    }

    pub fn build(&self) -> ConstructedGraph {
        let mut rng = DrawRng::new(self.seed);
        let centroids = gaussian_matrix(self.communities, self.feat_dim, &mut rng);
        let user_feat = self.features(self.users, &centroids, &mut rng);
        let item_feat = self.features(self.items, &centroids, &mut rng);
        let per_item = self.items as f64 / self.communities as f64;
        let (src, dst) = (0..self.edges)
            .map(|_| {
                let u = rng.index(self.users);
                let v = if rng.uniform() < self.noise {
                    rng.index(self.items)
                } else {
                    let c = self.community(u, self.users);
                    let lo = (c as f64 * per_item).ceil() as usize;
                    let hi = (((c + 1) as f64 * per_item).ceil() as usize).min(self.items);
                    lo + rng.index(hi - lo)
                };
                (u as u64, v as u64)
            })
            .unzip();
        GraphBuilder::new("bipartite", self.seed)
            .node_type("user", self.users)
            .node_type("item", self.items)
            .feature("user", "feat", user_feat)
            .feature("item", "feat", item_feat)
            .relation("user", "buys", "item", src, dst)
            .lp_split("buys", [0.8, 0.1, 0.1])
            .build()
    }
}

/// Homophilous single-type graph: each node's class is its community,
/// `homophily` of in-edges come from the same class, and features are a
/// weak noisy copy of the class centroid.
pub fn planted_homophily(nodes: usize, classes: usize, degree: usize, homophily: f64, feat_dim: usize, feat_noise: f64, split: [f64; 3], seed: u64) -> ConstructedGraph {
    let mut rng = DrawRng::new(seed);
    let centroids = gaussian_matrix(classes, feat_dim, &mut rng);
    let class: Vec<usize> = (0..nodes).map(|_| rng.index(classes)).collect();
    let mut members = vec![Vec::new(); classes];
    for (v, &c) in class.iter().enumerate() {
        members[c].push(v);
    }
    let mut feat = FeatureMatrix::zeros(nodes, feat_dim);
    for v in 0..nodes {
        for k in 0..feat_dim {
            feat.data[v * feat_dim + k] = centroids.data[class[v] * feat_dim + k] + (feat_noise * gaussian(&mut rng)) as f32;
        }
    }
    let (mut src, mut dst) = (Vec::new(), Vec::new());
    for v in 0..nodes {
        for _ in 0..degree {
            let same = &members[class[v]];
            let u = if rng.uniform() < homophily { same[rng.index(same.len())] } else { rng.index(nodes) };
            src.push(u as u64);
            dst.push(v as u64);
        }
    }
    GraphBuilder::new("homophily", seed)
        .node_type("node", nodes)
        .feature("node", "feat", feat)
        .labels("node", class.iter().map(|&c| c as i32).collect(), split)
        .relation("node", "link", "node", src, dst)
        .build()
}
