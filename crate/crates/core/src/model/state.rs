use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::layer::{layer_backward, layer_forward, layer_forward_aggregated, LayerCache, LayerWeights, RelEnds};
use super::optim::OptimizerState;
use super::params::{Grads, Param, ParamStore};
use crate::engine::{Block, MiniBatchBlocks};
use crate::gconstruct::FeatureMatrix;
use crate::error::{Error, Result};
use crate::partition::GraphMeta;
use crate::schema::{RelationInit, RelationType, ScorerKind, Task, TrainConfig};
use crate::util::{stable_hash, DrawRng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub name: String,
    pub input_dim: usize,
    /// Learnable embedding table for a featureless type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelSpec {
    pub relation: RelationType,
    pub src_type: usize,
    pub dst_type: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderSpec {
    None,
    Classifier { node_type: usize, num_classes: usize },
    LinkPrediction { scorer: ScorerKind, relations: Vec<usize> },
}

/// Everything that fixes parameter names and shapes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub node_types: Vec<InputSpec>,
    pub relations: Vec<RelSpec>,
    pub decoder: DecoderSpec,
}

impl ModelSpec {
    /// Encoder over every node type and relation of the graph, decoder per task.
    pub fn from_meta(meta: &GraphMeta, config: &TrainConfig) -> Result<Self> {
        let (node_types, relations) = encoder_layout(meta);
        let decoder = match config.task {
            Task::NodeClassification => {
                let name = config.target_ntype.as_deref().unwrap_or_default();
                let t = meta.node_type(name).ok_or_else(|| Error::invalid(format!("target_ntype `{name}` is not in the graph")))?;
                let num_classes = meta.node_types[t]
                    .num_classes
                    .filter(|&c| c > 0)
                    .ok_or_else(|| Error::invalid(format!("node type `{name}` has no classification labels")))?;
                DecoderSpec::Classifier { node_type: t, num_classes }
            }
            Task::LinkPrediction => {
                let rels = config
                    .target_etypes()
                    .iter()
                    .map(|r| meta.relation(r).ok_or_else(|| Error::invalid(format!("target_etype ({r}) is not in the graph"))))
                    .collect::<Result<Vec<_>>>()?;
                DecoderSpec::LinkPrediction {
                    scorer: config.scorer,
                    relations: rels,
                }
            }
            Task::Distillation => DecoderSpec::None,
        };
        Ok(Self {
            hidden_dim: config.hidden_dim,
            num_layers: config.num_layers,
            node_types,
            relations,
            decoder,
        })
    }

    /// This spec's dimensions and decoder over another graph's layout; a
    /// checkpoint is usable on `meta` iff this equals its own spec.
    pub fn for_graph(&self, meta: &GraphMeta) -> Result<Self> {
        let (node_types, relations) = encoder_layout(meta);
        Ok(Self {
            node_types,
            relations,
            ..self.clone()
        })
    }

    pub fn fingerprint(&self) -> u64 {
        stable_hash(&[serde_json::to_string(self).expect("spec serializes").as_bytes()])
    }

    /// Human-readable list of differences, empty when compatible.
    pub fn differences(&self, other: &ModelSpec) -> Vec<String> {
        let mut out = Vec::new();
        if self.hidden_dim != other.hidden_dim {
            out.push(format!("hidden_dim {} vs {}", self.hidden_dim, other.hidden_dim));
        }
        if self.num_layers != other.num_layers {
            out.push(format!("num_layers {} vs {}", self.num_layers, other.num_layers));
        }
        if self.node_types != other.node_types {
            out.push("node types or input dims differ".into());
        }
        if self.relations != other.relations {
            out.push("relations differ".into());
        }
        if self.decoder != other.decoder {
            out.push(format!("decoder {:?} vs {:?}", self.decoder, other.decoder));
        }
        out
    }

    pub fn rel_ends(&self) -> Vec<RelEnds> {
        self.relations
            .iter()
            .map(|r| RelEnds {
                src_type: r.src_type,
                dst_type: r.dst_type,
            })
            .collect()
    }
}

/// Featureless types still present here (construct mode leaves types
/// without featured in-neighbors featureless) get an embedding table.
fn encoder_layout(meta: &GraphMeta) -> (Vec<InputSpec>, Vec<RelSpec>) {
    let node_types = meta
        .node_types
        .iter()
        .map(|n| InputSpec {
            name: n.name.clone(),
            input_dim: n.input_dim(),
            embedding_rows: n.is_featureless().then_some(n.count),
        })
        .collect();
    let relations = meta
        .relations
        .iter()
        .map(|r| RelSpec {
            relation: r.relation.clone(),
            src_type: r.src_type,
            dst_type: r.dst_type,
        })
        .collect();
    (node_types, relations)
}

pub fn input_weight(t: &str) -> String {
    format!("input.{t}.weight")
}
pub fn input_bias(t: &str) -> String {
    format!("input.{t}.bias")
}
pub fn embed_name(t: &str) -> String {
    format!("embed.{t}")
}
pub fn self_weight(l: usize) -> String {
    format!("layer{l}.self.weight")
}
pub fn layer_bias(l: usize) -> String {
    format!("layer{l}.bias")
}
pub fn rel_weight(l: usize, rel: &RelationType) -> String {
    format!("layer{l}.rel.{}.weight", rel.file_stem())
}
pub fn decoder_rel(rel: &RelationType) -> String {
    format!("decoder.rel.{}", rel.file_stem())
}
pub const DECODER_WEIGHT: &str = "decoder.weight";
pub const DECODER_BIAS: &str = "decoder.bias";

/// Initialization choices that are not part of the spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    pub seed: u64,
    pub relation_init: RelationInit,
    pub freeze_relation_embeddings: bool,
}

impl InitOptions {
    pub fn from_config(config: &TrainConfig) -> Self {
        Self {
            seed: config.rng_seed,
            relation_init: config.relation_init,
            freeze_relation_embeddings: config.freeze_relation_embeddings,
        }
    }
}

/// Parameters, their shapes and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub spec: ModelSpec,
    pub params: ParamStore,
    pub optimizer: OptimizerState,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncodeCache {
    inputs: Vec<Option<Array2<f64>>>,
    layers: Vec<LayerCache>,
}

impl ModelState {
    /// Glorot-uniform weights, zero biases, N(0, 1/d) embedding rows.
    pub fn init(spec: ModelSpec, opts: InitOptions, optimizer: OptimizerState) -> Self {
        let mut rng = DrawRng::new(opts.seed ^ 0x5eed_0f_4d31);
        let h = spec.hidden_dim;
        let mut params = ParamStore::default();
        for n in &spec.node_types {
            if n.input_dim > 0 {
                params.insert(input_weight(&n.name), Param::glorot(n.input_dim, h, &mut rng));
                params.insert(input_bias(&n.name), Param::zeros(1, h));
            } else if let Some(rows) = n.embedding_rows {
                params.insert(embed_name(&n.name), Param::normal(rows, h, 1.0 / (h as f64).sqrt(), &mut rng).sparse());
            }
        }
        for l in 0..spec.num_layers {
            params.insert(self_weight(l), Param::glorot(h, h, &mut rng));
            for r in &spec.relations {
                params.insert(rel_weight(l, &r.relation), Param::glorot(h, h, &mut rng));
            }
            params.insert(layer_bias(l), Param::zeros(1, h));
        }
        match &spec.decoder {
            DecoderSpec::None => {}
            DecoderSpec::Classifier { num_classes, .. } => {
                params.insert(DECODER_WEIGHT, Param::glorot(h, *num_classes, &mut rng));
                params.insert(DECODER_BIAS, Param::zeros(1, *num_classes));
            }
            DecoderSpec::LinkPrediction { scorer, relations } => {
                if *scorer == ScorerKind::Distmult {
                    for &r in relations {
                        let mut p = match opts.relation_init {
                            RelationInit::Ones => Param::filled(1, h, 1.0),
                            RelationInit::Normal => Param::normal(1, h, 1.0, &mut rng),
                        };
                        p.frozen = opts.freeze_relation_embeddings;
                        params.insert(decoder_rel(&spec.relations[r].relation), p);
                    }
                }
            }
        }
        Self { spec, params, optimizer }
    }

    pub fn check_compatible(&self, expected: &ModelSpec) -> Result<()> {
        let diff = self.spec.differences(expected);
        if diff.is_empty() {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "checkpoint fingerprint {:016x} does not match configuration {:016x}: {}",
                self.spec.fingerprint(),
                expected.fingerprint(),
                diff.join("; ")
            )))
        }
    }

    fn layer_weights(&self, l: usize) -> Result<LayerWeights<'_>> {
        Ok(LayerWeights {
            w_self: self.params.get(&self_weight(l))?.view(),
            w_rel: self
                .spec
                .relations
                .iter()
                .map(|r| self.params.get(&rel_weight(l, &r.relation)).map(Param::view))
                .collect::<Result<_>>()?,
            bias: row_view(self.params.get(&layer_bias(l))?),
        })
    }

    /// Encodes the batch; returns one matrix per node type with rows aligned
    /// to `mb.seeds[t]`.
    pub fn encode(&self, mb: &MiniBatchBlocks) -> Result<(Vec<Array2<f64>>, EncodeCache)> {
        if mb.blocks.len() != self.spec.num_layers {
            return Err(Error::Shape(format!("{} blocks for a {}-layer model", mb.blocks.len(), self.spec.num_layers)));
        }
        let (mut hs, x_cache) = self.encode_inputs(mb.input_nodes(), &mb.inputs)?;
        let mut layers = Vec::with_capacity(mb.blocks.len());
        for (l, block) in mb.blocks.iter().enumerate() {
            let (out, cache) = self.layer_step(l, block, hs)?;
            hs = out;
            layers.push(cache);
        }
        Ok((hs, EncodeCache { inputs: x_cache, layers }))
    }

    /// Input encoders: projected features, embedding rows, or zeros.
    pub fn encode_inputs(&self, ids: &[Vec<u64>], inputs: &[FeatureMatrix]) -> Result<(Vec<Array2<f64>>, Vec<Option<Array2<f64>>>)> {
        let h = self.spec.hidden_dim;
        let mut x_cache = Vec::with_capacity(self.spec.node_types.len());
        let mut hs = Vec::with_capacity(self.spec.node_types.len());
        for (t, n) in self.spec.node_types.iter().enumerate() {
            let ids = &ids[t];
            if n.input_dim > 0 {
                let feat = &inputs[t];
                if feat.rows != ids.len() || feat.cols != n.input_dim {
                    return Err(Error::Shape(format!(
                        "{} inputs are {}x{}, expected {}x{}",
                        n.name,
                        feat.rows,
                        feat.cols,
                        ids.len(),
                        n.input_dim
                    )));
                }
                let x = Array2::from_shape_vec((feat.rows, feat.cols), feat.data.iter().map(|&v| f64::from(v)).collect()).expect("shape");
                let mut z = x.dot(&self.params.get(&input_weight(&n.name))?.view());
                z += &row_view(self.params.get(&input_bias(&n.name))?);
                hs.push(z);
                x_cache.push(Some(x));
            } else if n.embedding_rows.is_some() {
                let table = self.params.get(&embed_name(&n.name))?;
                let mut z = Array2::zeros((ids.len(), h));
                for (i, &g) in ids.iter().enumerate() {
                    if g as usize >= table.rows {
                        return Err(Error::Shape(format!("{} id {g} outside embedding table of {} rows", n.name, table.rows)));
                    }
                    z.row_mut(i).assign(&ArrayView1::from(table.row(g as usize)));
                }
                hs.push(z);
                x_cache.push(None);
            } else {
                hs.push(Array2::zeros((ids.len(), h)));
                x_cache.push(None);
            }
        }
        Ok((hs, x_cache))
    }

    /// Layer `l` over one block; ReLU on every layer but the last.
    pub fn layer_step(&self, l: usize, block: &Block, inputs: Vec<Array2<f64>>) -> Result<(Vec<Array2<f64>>, LayerCache)> {
        if l >= self.spec.num_layers {
            return Err(Error::Shape(format!("layer {l} requested from a {}-layer model", self.spec.num_layers)));
        }
        let w = self.layer_weights(l)?;
        Ok(layer_forward(&w, block, &self.spec.rel_ends(), inputs, l + 1 < self.spec.num_layers))
    }

    /// Layer `l` from destination rows and precomputed neighbor means.
    pub fn layer_step_aggregated(&self, l: usize, self_rows: &[ArrayView2<f64>], agg: &[Option<Array2<f64>>]) -> Result<Vec<Array2<f64>>> {
        if l >= self.spec.num_layers {
            return Err(Error::Shape(format!("layer {l} requested from a {}-layer model", self.spec.num_layers)));
        }
        let w = self.layer_weights(l)?;
        Ok(layer_forward_aggregated(&w, &self.spec.rel_ends(), self_rows, agg, l + 1 < self.spec.num_layers))
    }

    /// Accumulates parameter gradients given the gradient of the encoder outputs.
    pub fn encode_backward(&self, mb: &MiniBatchBlocks, cache: &EncodeCache, d_out: Vec<Array2<f64>>, grads: &mut Grads) -> Result<()> {
        let rels = self.spec.rel_ends();
        let mut d = d_out;
        for l in (0..mb.blocks.len()).rev() {
            let w = self.layer_weights(l)?;
            let g = layer_backward(&w, &mb.blocks[l], &rels, &cache.layers[l], &d);
            grads.add_dense(&self_weight(l), &g.d_w_self);
            for (r, dw) in self.spec.relations.iter().zip(&g.d_w_rel) {
                grads.add_dense(&rel_weight(l, &r.relation), dw);
            }
            grads.add_dense(&layer_bias(l), &g.d_bias.insert_axis(ndarray::Axis(0)));
            d = g.d_inputs;
        }
        let input_nodes = mb.input_nodes();
        for (t, n) in self.spec.node_types.iter().enumerate() {
            let dz = &d[t];
            if dz.nrows() == 0 {
                continue;
            }
            if let Some(x) = &cache.inputs[t] {
                grads.add_dense(&input_weight(&n.name), &x.t().dot(dz));
                grads.add_dense(&input_bias(&n.name), &dz.sum_axis(ndarray::Axis(0)).insert_axis(ndarray::Axis(0)));
            } else if n.embedding_rows.is_some() {
                let table = self.params.get(&embed_name(&n.name))?;
                if table.frozen {
                    continue;
                }
                let name = embed_name(&n.name);
                for (i, &g) in input_nodes[t].iter().enumerate() {
                    grads.add_row(&name, g, dz.row(i).as_slice().expect("contiguous"));
                }
            }
        }
        Ok(())
    }

    /// Classifier logits for encoder outputs.
    pub fn classifier_params(&self) -> Result<(ArrayView2<'_, f64>, ArrayView1<'_, f64>)> {
        Ok((self.params.get(DECODER_WEIGHT)?.view(), row_view(self.params.get(DECODER_BIAS)?)))
    }

    /// Relation vector of a target relation for DistMult, `None` for dot.
    pub fn relation_vector(&self, rel: usize) -> Result<Option<&[f64]>> {
        match &self.spec.decoder {
            DecoderSpec::LinkPrediction {
                scorer: ScorerKind::Distmult, ..
            } => Ok(Some(&self.params.get(&decoder_rel(&self.spec.relations[rel].relation))?.data)),
            _ => Ok(None),
        }
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|(_, p)| p.len()).sum()
    }
}

pub(crate) fn row_view(p: &Param) -> ArrayView1<'_, f64> {
    ArrayView1::from(&p.data[..])
}

/// Helper for tests and trainers: a zero matrix per type sized like `outputs`.
pub fn zeros_like(outputs: &[Array2<f64>]) -> Vec<Array2<f64>> {
    outputs.iter().map(|o| Array2::zeros(o.dim())).collect()
}

pub fn to_row(v: Array1<f64>) -> Array2<f64> {
    v.insert_axis(ndarray::Axis(0))
}
