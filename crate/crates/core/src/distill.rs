//! Distillation of a trained GNN into a graph-free MLP student.
//!
//! The teacher is a matrix with one row per node of the target type: its
//! embeddings, or its class probabilities in soft-label mode. The student
//! sees only the node's own input features, so it can embed nodes that have
//! no edges at all.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gconstruct::SplitMasks;
use crate::model::{argmax_rows, classifier_forward_loss, read_tensors, write_tensors, Grads, OptimizerState, Param, ParamStore, TensorEntry, CHECKPOINT_FORMAT, CHECKPOINT_MANIFEST};
use crate::partition::Partition;
use crate::pipeline::{evaluate_accuracy, prepare_partitions};
use crate::schema::{Activation, DistillConfig, DistillMode, OptimizerKind, TrainConfig};
use crate::util::{binio, mix64, DrawRng};

const ORDER_TAG: u64 = 0x6469_7374;
const DECODER_TAG: u64 = 0x6465_636f;
const DECODER_LR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentSpec {
    pub node_type: String,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub mode: DistillMode,
}

impl StudentSpec {
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend(&self.hidden);
        d.push(self.output_dim);
        d
    }
}

fn weight_name(i: usize) -> String {
    format!("mlp.{i}.weight")
}

fn bias_name(i: usize) -> String {
    format!("mlp.{i}.bias")
}

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Relu => x.max(0.0),
        Activation::Tanh => x.tanh(),
        Activation::Identity => x,
    }
}

/// Derivative of the activation, given the pre-activation `z`.
fn act_grad(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => f64::from(u8::from(z > 0.0)),
        Activation::Tanh => 1.0 - z.tanh().powi(2),
        Activation::Identity => 1.0,
    }
}

#[derive(Debug, Clone)]
pub struct MlpStudent {
    pub spec: StudentSpec,
    pub params: ParamStore,
    pub optimizer: OptimizerState,
}

struct Trace {
    /// Input of every layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every hidden layer.
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StudentManifest {
    format: String,
    student: StudentSpec,
    optimizer: OptimizerState,
    tensors: Vec<TensorEntry>,
}

impl MlpStudent {
    /// Glorot weights and zero biases.
    pub fn new(spec: StudentSpec, seed: u64, optimizer: OptimizerState) -> Self {
        let mut rng = DrawRng::new(seed);
        let mut params = ParamStore::default();
        for (i, w) in spec.dims().windows(2).enumerate() {
            params.insert(weight_name(i), Param::glorot(w[0], w[1], &mut rng));
            params.insert(bias_name(i), Param::zeros(1, w[1]));
        }
        Self { spec, params, optimizer }
    }

    pub fn num_layers(&self) -> usize {
        self.spec.hidden.len() + 1
    }

    fn layer(&self, i: usize, x: &Array2<f64>) -> Result<Array2<f64>> {
        let w = self.params.get(&weight_name(i))?;
        let b = self.params.get(&bias_name(i))?;
        if x.ncols() != w.rows {
            return Err(Error::Shape(format!("student layer {i} takes {} columns, got {}", w.rows, x.ncols())));
        }
        Ok(x.dot(&w.view()) + &b.view().row(0))
    }

    fn trace(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Trace)> {
        let mut t = Trace { inputs: Vec::new(), pre: Vec::new() };
        let mut h = x.clone();
        for i in 0..self.num_layers() {
            let z = self.layer(i, &h)?;
            t.inputs.push(h);
            if i + 1 < self.num_layers() {
                h = z.mapv(|v| act(self.spec.activation, v));
                t.pre.push(z);
            } else {
                h = z;
            }
        }
        Ok((h, t))
    }

    /// Student outputs for a feature matrix (one row per node).
    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.trace(x).map(|(out, _)| out)
    }

    fn backward(&self, trace: &Trace, d_out: Array2<f64>, grads: &mut Grads) -> Result<()> {
        let mut d = d_out;
        for i in (0..self.num_layers()).rev() {
            if i + 1 < self.num_layers() {
                let z = &trace.pre[i];
                d.zip_mut_with(z, |g, &z| *g *= act_grad(self.spec.activation, z));
            }
            grads.add_dense(&weight_name(i), &trace.inputs[i].t().dot(&d));
            grads.add_dense(&bias_name(i), &d.sum_axis(Axis(0)).insert_axis(Axis(0)));
            if i > 0 {
                d = d.dot(&self.params.get(&weight_name(i))?.view().t());
            }
        }
        Ok(())
    }

    /// Objective and its gradient for one batch.
    pub fn loss_and_grads(&self, x: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Grads)> {
        let (out, trace) = self.trace(x)?;
        let (loss, d) = objective(self.spec.mode, &out, target)?;
        let mut grads = Grads::new();
        self.backward(&trace, d, &mut grads)?;
        Ok((loss, grads))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let manifest = StudentManifest {
            format: CHECKPOINT_FORMAT.to_string(),
            student: self.spec.clone(),
            optimizer: self.optimizer.clone(),
            tensors: write_tensors(dir, &self.params, &self.optimizer)?,
        };
        binio::write_json(&dir.join(CHECKPOINT_MANIFEST), &manifest)
    }

    pub fn restore(dir: &Path) -> Result<Self> {
        let manifest: StudentManifest = binio::read_json(&dir.join(CHECKPOINT_MANIFEST))?;
        if manifest.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown checkpoint format `{}`", manifest.format)));
        }
        let mut optimizer = manifest.optimizer;
        let params = read_tensors(dir, &manifest.tensors, &mut optimizer)?;
        let student = Self { spec: manifest.student, params, optimizer };
        for (i, w) in student.spec.dims().windows(2).enumerate() {
            let p = student.params.get(&weight_name(i))?;
            if (p.rows, p.cols) != (w[0], w[1]) {
                return Err(Error::Checkpoint(format!("`{}` is {}x{}, spec says {}x{}", weight_name(i), p.rows, p.cols, w[0], w[1])));
            }
        }
        Ok(student)
    }
}

/// Mean over rows of the squared L2 distance, and its gradient.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    check_shapes(pred, target)?;
    let n = pred.nrows().max(1) as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

/// Mean over rows of the cross-entropy of `softmax(logits)` against the
/// target distributions, and its gradient.
pub fn soft_label_loss(logits: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    check_shapes(logits, target)?;
    let n = logits.nrows().max(1) as f64;
    let mut loss = 0.0;
    let mut d = Array2::zeros(logits.raw_dim());
    for ((z, p), mut g) in logits.rows().into_iter().zip(target.rows()).zip(d.rows_mut()) {
        let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        for j in 0..z.len() {
            loss -= p[j] * (z[j] - lse);
            g[j] = ((z[j] - lse).exp() - p[j]) / n;
        }
    }
    Ok((loss / n, d))
}

fn check_shapes(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("student output is {:?}, teacher is {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

fn objective(mode: DistillMode, out: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    match mode {
        DistillMode::Embeddings => mse_loss(out, target),
        DistillMode::SoftLabels => soft_label_loss(out, target),
    }
}

/// Minibatch training over all rows; returns the full-set objective after
/// every epoch.
pub fn fit_student(student: &mut MlpStudent, x: &Array2<f64>, target: &Array2<f64>, epochs: usize, batch_size: usize, seed: u64) -> Result<Vec<f64>> {
    if x.nrows() != target.nrows() {
        return Err(Error::Shape(format!("{} feature rows for {} teacher rows", x.nrows(), target.nrows())));
    }
    let n = x.nrows();
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..n).collect();
        DrawRng::new(mix64(&[seed, ORDER_TAG, epoch as u64])).shuffle(&mut order);
        for batch in order.chunks(batch_size.max(1)) {
            let (_, grads) = student.loss_and_grads(&x.select(Axis(0), batch), &target.select(Axis(0), batch))?;
            let set = grads.into_gradset(&student.params)?;
            student.optimizer.apply(&mut student.params, &set)?;
        }
        let (loss, _) = objective(student.spec.mode, &student.forward(x)?, target)?;
        log::info!("distill epoch {epoch}: objective {loss:.6}");
        curve.push(loss);
    }
    Ok(curve)
}

/// Rows of one node type gathered from all partitions in global id order.
struct NodeTable {
    features: Array2<f64>,
    labels: Option<Vec<i32>>,
    split: Option<SplitMasks>,
}

fn node_table(parts: &[Arc<Partition>], t: usize) -> Result<NodeTable> {
    let nt = &parts[0].meta.node_types[t];
    let (n, dim) = (nt.count, nt.input_dim());
    let mut features = Array2::zeros((n, dim));
    let mut labels = nt.num_classes.map(|_| vec![-1; n]);
    let mut split = nt.has_split.then(|| SplitMasks::empty(n));
    for p in parts {
        let gids = p.global_ids(t);
        let m = p.local_inputs(t, gids)?;
        for (i, &g) in gids.iter().enumerate() {
            let g = g as usize;
            for (dst, &src) in features.row_mut(g).iter_mut().zip(m.row(i)) {
                *dst = f64::from(src);
            }
            if let (Some(all), Some(local)) = (labels.as_mut(), p.labels(t)) {
                all[g] = local[i];
            }
            if let (Some(all), Some(local)) = (split.as_mut(), p.split(t)) {
                all.train[g] = local.train[i];
                all.val[g] = local.val[i];
                all.test[g] = local.test[i];
            }
        }
    }
    Ok(NodeTable { features, labels, split })
}

/// Input features of every node of `node_type`, ignoring all edges.
pub fn node_features(parts: &[Arc<Partition>], node_type: &str) -> Result<Array2<f64>> {
    let t = type_index(parts, node_type)?;
    node_table(parts, t).map(|n| n.features)
}

fn type_index(parts: &[Arc<Partition>], node_type: &str) -> Result<usize> {
    let meta = &parts.first().ok_or_else(|| Error::invalid("no partitions"))?.meta;
    meta.node_types
        .iter()
        .position(|n| n.name == node_type)
        .ok_or_else(|| Error::invalid(format!("unknown node type `{node_type}`")))
}

/// Reads the teacher matrix written by embedding inference:
/// `<type>.emb.bin` for embeddings, `<type>.probs.bin` for soft labels.
pub fn load_teacher(dir: &Path, node_type: &str, mode: DistillMode) -> Result<Array2<f64>> {
    let file = match mode {
        DistillMode::Embeddings => format!("{node_type}.emb.bin"),
        DistillMode::SoftLabels => format!("{node_type}.probs.bin"),
    };
    let (r, c, data) = binio::read_f32_matrix(&dir.join(file))?;
    Ok(Array2::from_shape_vec((r, c), data.into_iter().map(f64::from).collect()).expect("matrix shape"))
}

/// Trains a fresh softmax decoder on the train-split rows of `embeddings`
/// and returns its accuracy on the test-split rows.
pub fn evaluate_student(embeddings: &Array2<f64>, labels: &[i32], split: &SplitMasks, epochs: usize, seed: u64) -> Result<f64> {
    if embeddings.nrows() != labels.len() {
        return Err(Error::Shape(format!("{} embeddings for {} labels", embeddings.nrows(), labels.len())));
    }
    let classes = labels.iter().copied().max().unwrap_or(-1) + 1;
    if classes <= 0 {
        return Err(Error::invalid("no labeled nodes to decode"));
    }
    let pick = |mask: &[bool]| -> Vec<usize> { (0..labels.len()).filter(|&i| mask[i] && labels[i] >= 0).collect() };
    let (train, test) = (pick(&split.train), pick(&split.test));
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("decoder evaluation needs labeled train and test nodes"));
    }
    let h = embeddings.select(Axis(0), &train);
    let y: Vec<i32> = train.iter().map(|&i| labels[i]).collect();
    let mut rng = DrawRng::new(mix64(&[seed, DECODER_TAG]));
    let mut params = ParamStore::default();
    params.insert("w", Param::glorot(h.ncols(), classes as usize, &mut rng));
    params.insert("b", Param::zeros(1, classes as usize));
    let mut opt = OptimizerState::new(OptimizerKind::Adam, DECODER_LR);
    for _ in 0..epochs {
        let out = classifier_forward_loss(h.view(), params.get("w")?.view(), params.get("b")?.view().row(0), &y)?;
        let mut g = Grads::new();
        g.add_dense("w", &out.d_w);
        g.add_dense("b", &out.d_b.insert_axis(Axis(0)));
        let set = g.into_gradset(&params)?;
        opt.apply(&mut params, &set)?;
    }
    let w = params.get("w")?.view();
    let b: Array1<f64> = params.get("b")?.view().row(0).to_owned();
    let logits = embeddings.select(Axis(0), &test).dot(&w) + &b;
    let truth: Vec<i32> = test.iter().map(|&i| labels[i]).collect();
    evaluate_accuracy(&argmax_rows(&logits), &truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillEpoch {
    pub epoch: usize,
    /// Full-set objective after the epoch: MSE or soft-label cross-entropy.
    pub objective: f64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub mode: DistillMode,
    pub num_nodes: usize,
    pub epochs: Vec<DistillEpoch>,
    /// Test accuracy of a fresh decoder over student outputs, when labels exist.
    pub test_accuracy: Option<f64>,
}

impl DistillReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_json(path, self)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.objective).collect()
    }
}

#[derive(Debug, Clone)]
pub struct DistillOutput {
    pub student: MlpStudent,
    pub report: DistillReport,
}

/// Fits a student on every node of `config.target_ntype` against the
/// teacher rows (global id order), then scores it with a fresh decoder.
pub fn distill(parts: &[Arc<Partition>], teacher: &Array2<f64>, config: &TrainConfig) -> Result<DistillOutput> {
    let dc: &DistillConfig = config.distill.as_ref().ok_or_else(|| Error::validation("$.distill", "required for distillation"))?;
    let node_type = config.target_ntype.as_deref().ok_or_else(|| Error::validation("$.target_ntype", "required for distillation"))?;
    if parts.is_empty() {
        return Err(Error::invalid("no partitions"));
    }
    let parts = prepare_partitions(parts, config)?;
    let t = type_index(&parts, node_type)?;
    let table = node_table(&parts, t)?;
    if table.features.ncols() == 0 {
        return Err(Error::invalid(format!(
            "node type `{node_type}` has no features; featureless types need featureless = construct to be distilled"
        )));
    }
    if teacher.nrows() != table.features.nrows() {
        return Err(Error::Shape(format!("teacher has {} rows, `{node_type}` has {} nodes", teacher.nrows(), table.features.nrows())));
    }
    let spec = StudentSpec {
        node_type: node_type.to_string(),
        input_dim: table.features.ncols(),
        hidden: dc.student_hidden.clone(),
        output_dim: teacher.ncols(),
        activation: dc.activation,
        mode: dc.mode,
    };
    let mut student = MlpStudent::new(spec, config.rng_seed, OptimizerState::new(config.optimizer, config.learning_rate));
    let mut epochs = Vec::with_capacity(config.num_epochs);
    for epoch in 0..config.num_epochs {
        let start = Instant::now();
        let seed = mix64(&[config.rng_seed, epoch as u64]);
        let objective = fit_student(&mut student, &table.features, teacher, 1, config.batch_size, seed)?[0];
        epochs.push(DistillEpoch {
            epoch,
            objective,
            wall_secs: start.elapsed().as_secs_f64(),
        });
    }
    let test_accuracy = match (&table.labels, &table.split) {
        (Some(labels), Some(split)) if split.test.iter().any(|&b| b) => {
            Some(evaluate_student(&student.forward(&table.features)?, labels, split, dc.decoder_epochs, config.rng_seed)?)
        }
        _ => None,
    };
    Ok(DistillOutput {
        report: DistillReport {
            mode: dc.mode,
            num_nodes: table.features.nrows(),
            epochs,
            test_accuracy,
        },
        student,
    })
}
