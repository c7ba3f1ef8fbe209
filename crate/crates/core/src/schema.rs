//! Graph schema and training configuration files.
//!
//! Both are JSON. Structural errors (wrong types, unknown enum names) and
//! semantic errors (dangling node types, bad splits) are reported as
//! [`Error::Validation`] carrying a JSON path such as `$.edges[0].relation`.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "gconstruct-v0.1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSchema {
    pub version: String,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FileFormat {
    Csv,
    JsonLines,
}

/// Only `name` is honored; other per-format options are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub name: FileFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub node_type: String,
    pub format: FormatSpec,
    pub files: Vec<String>,
    pub node_id_col: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<FeatureSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<LabelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub relation: RelationType,
    pub format: FormatSpec,
    pub files: Vec<String>,
    pub source_id_col: String,
    pub dest_id_col: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<LabelSpec>,
    /// Per-edge positive weight used by the weighted cross-entropy loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_col: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub feature_col: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_name: Option<String>,
    #[serde(default, skip_serializing_if = "TransformSpec::is_none")]
    pub transform: TransformSpec,
}

impl FeatureSpec {
    pub fn output_name(&self) -> &str {
        self.feature_name.as_deref().unwrap_or(&self.feature_col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransformSpec {
    pub name: TransformKind,
}

impl TransformSpec {
    fn is_none(&self) -> bool {
        self.name == TransformKind::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    #[default]
    None,
    MaxMin,
    OneHot,
    FloatVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelTask {
    Classification,
    LinkPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_col: Option<String>,
    pub task_type: LabelTask,
    pub split_pct: [f64; 3],
}

/// Canonical edge type `(src_type, rel_name, dst_type)`, serialized as a 3-element array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct RelationType {
    pub src_type: String,
    pub name: String,
    pub dst_type: String,
}

impl RelationType {
    pub fn new(src: impl Into<String>, name: impl Into<String>, dst: impl Into<String>) -> Self {
        Self {
            src_type: src.into(),
            name: name.into(),
            dst_type: dst.into(),
        }
    }

    /// Name safe for use in file names.
    pub fn file_stem(&self) -> String {
        format!("{}__{}__{}", self.src_type, self.name, self.dst_type)
    }
}

impl From<(String, String, String)> for RelationType {
    fn from((s, r, d): (String, String, String)) -> Self {
        Self::new(s, r, d)
    }
}

impl From<RelationType> for (String, String, String) {
    fn from(r: RelationType) -> Self {
        (r.src_type, r.name, r.dst_type)
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.src_type, self.name, self.dst_type)
    }
}

fn from_json_text<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { format!("$.{path}") };
        Error::validation(path, e.into_inner().to_string())
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_schema(path: &Path) -> Result<GraphSchema> {
    parse_schema_str(&read_text(path)?)
}

pub fn parse_schema_str(text: &str) -> Result<GraphSchema> {
    let schema: GraphSchema = from_json_text(text)?;
    schema.validate()?;
    Ok(schema)
}

fn check_split(path: &str, label: &LabelSpec) -> Result<()> {
    if label.split_pct.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::validation(
            format!("{path}.split_pct"),
            "split fractions must be non-negative",
        ));
    }
    if label.split_pct.iter().sum::<f64>() > 1.0 + 1e-9 {
        return Err(Error::validation(
            format!("{path}.split_pct"),
            "split fractions exceed 1",
        ));
    }
    match (label.task_type, &label.label_col) {
        (LabelTask::Classification, None) => Err(Error::validation(
            format!("{path}.label_col"),
            "classification labels require label_col",
        )),
        (LabelTask::LinkPrediction, Some(_)) => Err(Error::validation(
            format!("{path}.label_col"),
            "link_prediction labels must not set label_col",
        )),
        _ => Ok(()),
    }
}

impl GraphSchema {
    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            log::warn!("schema version {:?}, expected {SCHEMA_VERSION:?}", self.version);
        }
        let mut node_types = HashSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let at = format!("$.nodes[{i}]");
            if node.node_type.is_empty() {
                return Err(Error::validation(format!("{at}.node_type"), "empty node_type"));
            }
            if !node_types.insert(node.node_type.as_str()) {
                return Err(Error::validation(
                    format!("{at}.node_type"),
                    format!("duplicate node_type `{}`", node.node_type),
                ));
            }
            if node.files.is_empty() {
                return Err(Error::validation(format!("{at}.files"), "files list is empty"));
            }
            let mut names = HashSet::new();
            for (j, feat) in node.features.iter().enumerate() {
                if !names.insert(feat.output_name()) {
                    return Err(Error::validation(
                        format!("{at}.features[{j}].feature_name"),
                        format!("duplicate feature name `{}`", feat.output_name()),
                    ));
                }
            }
            if node.labels.len() > 1 {
                return Err(Error::validation(
                    format!("{at}.labels"),
                    "at most one label spec per node type",
                ));
            }
            for (j, label) in node.labels.iter().enumerate() {
                let lat = format!("{at}.labels[{j}]");
                if label.task_type != LabelTask::Classification {
                    return Err(Error::validation(
                        format!("{lat}.task_type"),
                        "node labels support classification only",
                    ));
                }
                check_split(&lat, label)?;
            }
        }

        let mut relations = HashSet::new();
        for (i, edge) in self.edges.iter().enumerate() {
            let at = format!("$.edges[{i}]");
            for endpoint in [&edge.relation.src_type, &edge.relation.dst_type] {
                if !node_types.contains(endpoint.as_str()) {
                    return Err(Error::validation(
                        format!("{at}.relation"),
                        format!("node type `{endpoint}` is not declared in nodes"),
                    ));
                }
            }
            if !relations.insert(&edge.relation) {
                return Err(Error::validation(
                    format!("{at}.relation"),
                    format!("duplicate relation ({})", edge.relation),
                ));
            }
            if edge.files.is_empty() {
                return Err(Error::validation(format!("{at}.files"), "files list is empty"));
            }
            if edge.source_id_col == edge.dest_id_col {
                return Err(Error::validation(
                    format!("{at}.dest_id_col"),
                    "source_id_col and dest_id_col must differ",
                ));
            }
            if edge.labels.len() > 1 {
                return Err(Error::validation(
                    format!("{at}.labels"),
                    "at most one label spec per relation",
                ));
            }
            for (j, label) in edge.labels.iter().enumerate() {
                let lat = format!("{at}.labels[{j}]");
                if label.task_type != LabelTask::LinkPrediction {
                    return Err(Error::validation(
                        format!("{lat}.task_type"),
                        "edge labels support link_prediction only",
                    ));
                }
                check_split(&lat, label)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn node(&self, node_type: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.node_type == node_type)
    }
}

// ---------------------------------------------------------------------------
// Training configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    NodeClassification,
    LinkPrediction,
    Distillation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Dot,
    #[default]
    Distmult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    CrossEntropy,
    WeightedCrossEntropy,
    Contrastive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Uniform,
    #[default]
    Joint,
    LocalJoint,
    InBatch,
}

/// How featureless node types get their input representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturelessMode {
    /// Learnable embedding table with sparse row updates.
    #[default]
    Embedding,
    /// Mean of featured in-neighbors' input features.
    Construct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationInit {
    Ones,
    #[default]
    Normal,
}

/// Per-layer neighbor cap: a positive count or `"all"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fanout {
    Count(usize),
    All(AllMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllMarker {
    All,
}

impl Fanout {
    pub const ALL: Fanout = Fanout::All(AllMarker::All);

    pub fn limit(self) -> Option<usize> {
        match self {
            Fanout::Count(n) => Some(n),
            Fanout::All(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(t) => vec![t.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Stage-one link prediction pretraining for learnable embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub lp_etype: OneOrMany<RelationType>,
    #[serde(default = "defaults::num_epochs")]
    pub num_epochs: usize,
    #[serde(default)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillMode {
    #[default]
    Embeddings,
    SoftLabels,
}

/// Nonlinearity between student layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    /// Directory written by embedding inference (embeddings or predictions).
    pub teacher_path: PathBuf,
    #[serde(default = "defaults::student_hidden")]
    pub student_hidden: Vec<usize>,
    #[serde(default)]
    pub mode: DistillMode,
    #[serde(default)]
    pub activation: Activation,
    /// Epochs for the fresh softmax decoder used to score student embeddings.
    #[serde(default = "defaults::decoder_epochs")]
    pub decoder_epochs: usize,
}

mod defaults {
    pub fn hidden_dim() -> usize {
        32
    }
    pub fn num_layers() -> usize {
        1
    }
    pub fn fanout() -> Vec<super::Fanout> {
        vec![super::Fanout::Count(10)]
    }
    pub fn batch_size() -> usize {
        128
    }
    pub fn learning_rate() -> f64 {
        0.01
    }
    pub fn num_epochs() -> usize {
        10
    }
    pub fn num_negatives() -> usize {
        32
    }
    pub fn num_workers() -> usize {
        1
    }
    pub fn eval_negatives() -> usize {
        100
    }
    pub fn yes() -> bool {
        true
    }
    pub fn temperature() -> f64 {
        1.0
    }
    pub fn student_hidden() -> Vec<usize> {
        vec![64]
    }
    pub fn decoder_epochs() -> usize {
        100
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    #[serde(default)]
    pub target_ntype: Option<String>,
    #[serde(default)]
    pub target_etype: Option<OneOrMany<RelationType>>,
    #[serde(default = "defaults::hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default = "defaults::num_layers")]
    pub num_layers: usize,
    /// One entry per layer; defaults to 10 neighbors for the default single layer.
    #[serde(default = "defaults::fanout")]
    pub fanout: Vec<Fanout>,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::num_epochs")]
    pub num_epochs: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub scorer: ScorerKind,
    #[serde(default)]
    pub loss: LossKind,
    #[serde(default)]
    pub negative_sampler: SamplerKind,
    #[serde(default = "defaults::num_negatives")]
    pub num_negatives: usize,
    /// Sampler for the extra negatives `in_batch` needs when the batch is small.
    #[serde(default)]
    pub inbatch_fallback: Option<SamplerKind>,
    #[serde(default = "defaults::num_workers")]
    pub num_workers: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "defaults::eval_negatives")]
    pub eval_negatives: usize,
    #[serde(default = "defaults::yes")]
    pub exclude_training_targets: bool,
    /// Also hide the reverse orientation of each batch target.
    #[serde(default)]
    pub exclude_reverse: bool,
    /// Keep validation and test link-prediction edges out of message passing.
    #[serde(default = "defaults::yes")]
    pub exclude_eval_edges: bool,
    #[serde(default = "defaults::temperature")]
    pub contrastive_temperature: f64,
    /// Weighted cross-entropy: give negative edges weight 0 instead of 1.
    #[serde(default)]
    pub zero_negative_weights: bool,
    #[serde(default)]
    pub mrr_filtered: bool,
    #[serde(default)]
    pub mrr_full_ranking: bool,
    #[serde(default)]
    pub featureless: FeaturelessMode,
    #[serde(default)]
    pub relation_init: RelationInit,
    #[serde(default)]
    pub freeze_relation_embeddings: bool,
    #[serde(default)]
    pub two_stage: Option<TwoStageConfig>,
    #[serde(default)]
    pub distill: Option<DistillConfig>,
}

pub fn parse_train_config(path: &Path) -> Result<TrainConfig> {
    parse_train_config_str(&read_text(path)?)
}

pub fn parse_train_config_str(text: &str) -> Result<TrainConfig> {
    let config: TrainConfig = from_json_text(&with_default_fanout(text))?;
    config.validate()?;
    for warning in config.warnings() {
        log::warn!("{warning}");
    }
    Ok(config)
}

/// An omitted `fanout` means 10 neighbors on every layer.
fn with_default_fanout(text: &str) -> std::borrow::Cow<'_, str> {
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(serde_json::Value::Object(mut obj)) if !obj.contains_key("fanout") => {
            let layers = obj.get("num_layers").and_then(serde_json::Value::as_u64).unwrap_or(defaults::num_layers() as u64);
            obj.insert("fanout".into(), vec![10; layers.min(16) as usize].into());
            serde_json::Value::Object(obj).to_string().into()
        }
        _ => text.into(),
    }
}

impl TrainConfig {
    /// Defaults for everything optional.
    pub fn new(task: Task) -> Self {
        from_json_text(&format!(r#"{{"task": {}}}"#, serde_json::to_string(&task).unwrap()))
            .expect("default config")
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::validation("$.hidden_dim", "must be positive"));
        }
        if self.num_layers > 3 {
            return Err(Error::validation("$.num_layers", "must be in [0, 3]"));
        }
        if self.fanout.len() != self.num_layers {
            return Err(Error::validation(
                "$.fanout",
                format!(
                    "fanout has {} entries but num_layers is {}",
                    self.fanout.len(),
                    self.num_layers
                ),
            ));
        }
        if let Some(i) = self.fanout.iter().position(|f| *f == Fanout::Count(0)) {
            return Err(Error::validation(format!("$.fanout[{i}]"), "fanout must be >= 1 or \"all\""));
        }
        if self.num_negatives == 0 {
            return Err(Error::validation("$.num_negatives", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("$.batch_size", "must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("$.learning_rate", "must be finite and >= 0"));
        }
        if self.num_workers == 0 {
            return Err(Error::validation("$.num_workers", "must be >= 1"));
        }
        if self.eval_negatives == 0 {
            return Err(Error::validation("$.eval_negatives", "must be >= 1"));
        }
        if !(self.contrastive_temperature > 0.0) {
            return Err(Error::validation("$.contrastive_temperature", "must be > 0"));
        }
        if self.inbatch_fallback == Some(SamplerKind::InBatch) {
            return Err(Error::validation("$.inbatch_fallback", "fallback cannot be in_batch"));
        }
        match self.task {
            Task::NodeClassification | Task::Distillation if self.target_ntype.is_none() => {
                return Err(Error::validation("$.target_ntype", "required for this task"));
            }
            Task::LinkPrediction if self.target_etype.is_none() => {
                return Err(Error::validation("$.target_etype", "required for link_prediction"));
            }
            Task::Distillation if self.distill.is_none() => {
                return Err(Error::validation("$.distill", "required for distillation"));
            }
            _ => {}
        }
        if let Some(d) = &self.distill {
            if d.student_hidden.contains(&0) {
                return Err(Error::validation("$.distill.student_hidden", "dims must be positive"));
            }
        }
        Ok(())
    }

    pub fn target_etypes(&self) -> Vec<RelationType> {
        self.target_etype.as_ref().map(OneOrMany::to_vec).unwrap_or_default()
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.scorer == ScorerKind::Dot && self.target_etypes().len() > 1 {
            out.push(
                "dot scorer with multiple training edge types: scores cannot distinguish relations; \
                 consider distmult"
                    .to_string(),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CITATION_SCHEMA: &str = r#"{
        "version": "gconstruct-v0.1",
        "nodes": [{
            "node_type": "paper",
            "format": {"name": "csv"},
            "files": ["nodes/paper.csv"],
            "node_id_col": "node_id",
            "features": [{"feature_col": "feat", "feature_name": "feat"}],
            "labels": [{"label_col": "label", "task_type": "classification", "split_pct": [0.8, 0.1, 0.1]}]
        }],
        "edges": [{
            "relation": ["paper", "citing", "paper"],
            "format": {"name": "csv"},
            "files": ["edges/paper_citing_paper.csv"],
            "source_id_col": "source_id",
            "dest_id_col": "dest_id",
            "labels": [{"task_type": "link_prediction", "split_pct": [0.8, 0.1, 0.1]}]
        }]
    }"#;

    #[test]
    fn full_schema_document_parses() {
        let s = parse_schema_str(CITATION_SCHEMA).unwrap();
        assert_eq!(s.nodes.len(), 1);
        assert_eq!(s.edges.len(), 1);
        assert_eq!(s.nodes[0].labels[0].split_pct, [0.8, 0.1, 0.1]);
        assert_eq!(s.edges[0].relation, RelationType::new("paper", "citing", "paper"));
    }

    #[test]
    fn split_over_one_rejected() {
        let text = CITATION_SCHEMA.replacen("[0.8, 0.1, 0.1]", "[0.9, 0.2, 0.1]", 1);
        let err = parse_schema_str(&text).unwrap_err().to_string();
        assert!(err.contains("split fractions exceed 1"), "{err}");
        assert!(err.starts_with("$.nodes[0].labels[0].split_pct"), "{err}");
    }

    #[test]
    fn undeclared_endpoint_named() {
        let text = CITATION_SCHEMA.replace(r#"["paper", "citing", "paper"]"#, r#"["author", "writes", "paper"]"#);
        let err = parse_schema_str(&text).unwrap_err().to_string();
        assert!(err.contains("author"), "{err}");
        assert!(err.starts_with("$.edges[0].relation"), "{err}");
    }

    #[test]
    fn unknown_transform_reports_path() {
        let text = CITATION_SCHEMA.replace(
            r#""feature_name": "feat""#,
            r#""feature_name": "feat", "transform": {"name": "tokenize"}"#,
        );
        let err = parse_schema_str(&text).unwrap_err().to_string();
        assert!(err.starts_with("$.nodes[0].features[0].transform.name"), "{err}");
    }

    #[test]
    fn label_col_rules() {
        let text = CITATION_SCHEMA.replace(r#""label_col": "label", "#, "");
        assert!(parse_schema_str(&text).unwrap_err().to_string().contains("require label_col"));
        let text = CITATION_SCHEMA.replace(
            r#"{"task_type": "link_prediction""#,
            r#"{"label_col": "x", "task_type": "link_prediction""#,
        );
        assert!(parse_schema_str(&text).is_err());
    }

    #[test]
    fn same_id_columns_rejected() {
        let text = CITATION_SCHEMA.replace(r#""dest_id_col": "dest_id""#, r#""dest_id_col": "source_id""#);
        let err = parse_schema_str(&text).unwrap_err().to_string();
        assert!(err.contains("$.edges[0].dest_id_col"), "{err}");
    }

    #[test]
    fn malformed_json_is_error() {
        assert!(parse_schema_str("{").is_err());
    }

    #[test]
    fn config_defaults() {
        let c = parse_train_config_str(r#"{"task": "node_classification", "target_ntype": "paper", "num_layers": 0}"#).unwrap();
        assert_eq!(c.optimizer, OptimizerKind::Adam);
        assert!(c.exclude_training_targets);
        assert_eq!(c.eval_negatives, 100);
        assert_eq!(c.contrastive_temperature, 1.0);
    }

    #[test]
    fn fanout_rules() {
        let ok = r#"{"task": "node_classification", "target_ntype": "p", "num_layers": 2, "fanout": [5, 5]}"#;
        assert_eq!(parse_train_config_str(ok).unwrap().fanout, vec![Fanout::Count(5); 2]);
        let all = r#"{"task": "node_classification", "target_ntype": "p", "num_layers": 1, "fanout": ["all"]}"#;
        assert_eq!(parse_train_config_str(all).unwrap().fanout, vec![Fanout::ALL]);
        let bad = r#"{"task": "node_classification", "target_ntype": "p", "num_layers": 2, "fanout": [5]}"#;
        assert!(parse_train_config_str(bad).unwrap_err().to_string().starts_with("$.fanout"));
    }

    #[test]
    fn unknown_task_rejected() {
        let err = parse_train_config_str(r#"{"task": "regression"}"#).unwrap_err().to_string();
        assert!(err.starts_with("$.task"), "{err}");
    }

    #[test]
    fn dot_with_many_etypes_warns() {
        let c = parse_train_config_str(
            r#"{"task": "link_prediction", "scorer": "dot", "num_layers": 0,
                "target_etype": [["a","r","b"], ["a","s","b"]]}"#,
        )
        .unwrap();
        assert_eq!(c.warnings().len(), 1);
        assert_eq!(c.target_etypes().len(), 2);
    }
}
