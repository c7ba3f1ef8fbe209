use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::construct::prepare_partitions;
use super::embed::{eval_exclusion, worker_embeddings};
use super::metrics::{corruptions, rank_of};
use super::workers::{labeled_nodes, run_workers, shard, split_edges, EdgeRef, WorkerSync};
use crate::engine::{build_blocks, Cluster, ExclusionSet, MiniBatchBlocks, WorkerContext};
use crate::error::{Error, Result};
use crate::gconstruct::SplitMasks;
use crate::lp::{compute_loss, sample_negatives, DrawUniverse, LpScores};
use crate::model::{
    argmax_rows, classifier_forward_loss, classifier_logits, decoder_rel, score, score_backward, scale_gradset, Grads, InitOptions,
    ModelSpec, ModelState, OptimizerState, DECODER_BIAS, DECODER_WEIGHT,
};
use crate::partition::{GraphMeta, Partition};
use crate::schema::{SamplerKind, Task, TrainConfig};
use crate::util::{binio, mix64, DrawRng};

const ORDER_TAG: u64 = 0x6f72_6465_72;
const BATCH_TAG: u64 = 0x6261_7463_68;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: Option<f64>,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub task: Task,
    /// `accuracy` or `mrr`.
    pub metric: String,
    pub num_workers: usize,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters are returned: the best validation metric
    /// (earliest on ties), or the last epoch without a validation set.
    pub best_epoch: usize,
    pub best_val_metric: Option<f64>,
    pub test_metric: Option<f64>,
}

impl TrainReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_json(path, self)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ModelState,
    pub report: TrainReport,
    /// Partitions the model was trained on (differs from the input when
    /// featureless types got constructed features).
    pub partitions: Vec<Arc<Partition>>,
}

/// What an observer sees of each training batch on each worker.
#[derive(Debug)]
pub struct BatchView<'a> {
    pub worker: usize,
    pub epoch: usize,
    pub step: usize,
    /// Positive edges of the whole global batch (empty for node tasks).
    pub targets: &'a [EdgeRef],
    pub blocks: &'a MiniBatchBlocks,
}

/// Optional callbacks into a training run.
#[derive(Default)]
pub struct TrainHooks<'a> {
    pub on_batch: Option<&'a (dyn Fn(&BatchView<'_>) + Sync)>,
}

pub fn train_node_classification(parts: &[Arc<Partition>], config: &TrainConfig) -> Result<TrainOutput> {
    train(parts, config, None, &TrainHooks::default())
}

pub fn train_link_prediction(parts: &[Arc<Partition>], config: &TrainConfig) -> Result<TrainOutput> {
    train(parts, config, None, &TrainHooks::default())
}

/// Trains the task named by `config.task`, starting from `initial` when
/// given (its spec must match the graph and config).
pub fn train(parts: &[Arc<Partition>], config: &TrainConfig, initial: Option<ModelState>, hooks: &TrainHooks<'_>) -> Result<TrainOutput> {
    config.validate()?;
    if parts.is_empty() {
        return Err(Error::invalid("no partitions to train on"));
    }
    if config.num_workers != parts.len() {
        return Err(Error::invalid(format!(
            "num_workers ({}) must equal the number of partitions ({})",
            config.num_workers,
            parts.len()
        )));
    }
    let parts = prepare_partitions(parts, config)?;
    let meta = parts[0].meta.clone();
    let spec = ModelSpec::from_meta(&meta, config)?;
    let model = match initial {
        Some(m) => {
            m.check_compatible(&spec)?;
            m
        }
        None => ModelState::init(spec, InitOptions::from_config(config), OptimizerState::new(config.optimizer, config.learning_rate)),
    };
    let task: Box<dyn TaskRunner> = match config.task {
        Task::NodeClassification => Box::new(NcTask::new(&parts, config, &meta)?),
        Task::LinkPrediction => Box::new(LpTask::new(&parts, config, &meta)?),
        Task::Distillation => return Err(Error::invalid("distillation is not trained by the GNN trainer")),
    };
    log::info!("training {:?} with {} workers", config.task, parts.len());
    let cluster = Cluster::start(parts.clone())?;
    let mut results = run_workers(&cluster, |ctx, sync| worker_loop(ctx, sync, config, task.as_ref(), model.clone(), hooks))?;
    let (model, report) = results.swap_remove(0).expect("worker 0 reports");
    Ok(TrainOutput {
        model,
        report,
        partitions: parts,
    })
}

struct StepInput<'a> {
    epoch: usize,
    step: usize,
    batch: &'a [usize],
    mine: &'a [usize],
    batch_seed: u64,
    rng: DrawRng,
}

enum Split {
    Val,
    Test,
}

trait TaskRunner: Sync {
    fn metric(&self) -> &'static str;
    fn num_train(&self) -> usize;
    /// Sum of per-item losses over `mine` and gradients of that sum.
    fn step(&self, model: &ModelState, ctx: &WorkerContext, input: StepInput<'_>, hooks: &TrainHooks<'_>) -> Result<(f64, Grads)>;
    /// `None` when the split is empty.
    fn evaluate(&self, model: &ModelState, ctx: &WorkerContext, sync: &WorkerSync, split: Split) -> Result<Option<f64>>;
}

fn worker_loop(
    ctx: &WorkerContext,
    sync: &WorkerSync,
    config: &TrainConfig,
    task: &dyn TaskRunner,
    mut model: ModelState,
    hooks: &TrainHooks<'_>,
) -> Result<Option<(ModelState, TrainReport)>> {
    let w = ctx.worker_id;
    let workers = ctx.partition().num_parts();
    let n = task.num_train();
    if n == 0 {
        return Err(Error::invalid("no training items (empty train split)"));
    }
    let mut records = Vec::with_capacity(config.num_epochs);
    let mut best: Option<(Option<f64>, usize, ModelState)> = None;
    let mut global_step = 0u64;
    for epoch in 0..config.num_epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..n).collect();
        DrawRng::new(mix64(&[config.rng_seed, ORDER_TAG, epoch as u64])).shuffle(&mut order);
        let mut loss_total = 0.0;
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let mine = shard(batch, w, workers);
            let input = StepInput {
                epoch,
                step,
                batch,
                mine: &mine,
                batch_seed: mix64(&[config.rng_seed, BATCH_TAG, epoch as u64, step as u64]),
                rng: DrawRng::for_step(config.rng_seed, w, global_step),
            };
            let (loss_sum, grads) = task.step(&model, ctx, input, hooks)?;
            let mut g = grads.into_gradset(&model.params)?;
            scale_gradset(&mut g, workers as f64 / batch.len() as f64);
            let reduced = sync.grads.all_reduce(w, g)?;
            let ModelState { params, optimizer, .. } = &mut model;
            optimizer.apply(params, &reduced)?;
            loss_total += sync.sum(w, vec![loss_sum])?[0];
            global_step += 1;
        }
        let val = task.evaluate(&model, ctx, sync, Split::Val)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_total / n as f64,
            val_metric: val,
            wall_secs: start.elapsed().as_secs_f64(),
        };
        if w == 0 {
            log::info!("epoch {epoch}: train loss {:.6}, val {} {:?}", record.train_loss, task.metric(), val);
        }
        records.push(record);
        let better = match (&best, val) {
            (None, _) => true,
            (Some(_), None) => true,
            (Some((Some(b), _, _)), Some(v)) => v > *b,
            (Some((None, _, _)), Some(_)) => true,
        };
        if better {
            best = Some((val, epoch, model.clone()));
        }
    }
    let Some((best_val, best_epoch, best_model)) = best else {
        return Err(Error::invalid("num_epochs must be >= 1"));
    };
    let test = task.evaluate(&best_model, ctx, sync, Split::Test)?;
    if w != 0 {
        return Ok(None);
    }
    let report = TrainReport {
        task: config.task,
        metric: task.metric().to_string(),
        num_workers: workers,
        epochs: records,
        best_epoch,
        best_val_metric: best_val,
        test_metric: test,
    };
    Ok(Some((best_model, report)))
}

fn pick(split: Split) -> impl Fn(&SplitMasks, usize) -> bool {
    move |m: &SplitMasks, i: usize| match split {
        Split::Val => m.val[i],
        Split::Test => m.test[i],
    }
}

// ---------------------------------------------------------------------------
// Node classification

struct NcTask<'a> {
    config: &'a TrainConfig,
    target: usize,
    train: Vec<(u64, i32)>,
    val: Vec<(u64, i32)>,
    test: Vec<(u64, i32)>,
    exclusion: Arc<ExclusionSet>,
}

impl<'a> NcTask<'a> {
    fn new(parts: &[Arc<Partition>], config: &'a TrainConfig, meta: &GraphMeta) -> Result<Self> {
        let name = config.target_ntype.as_deref().unwrap_or_default();
        let target = meta.node_type(name).ok_or_else(|| Error::invalid(format!("target_ntype `{name}` is not in the graph")))?;
        if !meta.node_types[target].has_split {
            return Err(Error::invalid(format!("node type `{name}` has no classification splits")));
        }
        let train = labeled_nodes(parts, target, |m, i| m.train[i]);
        if train.is_empty() {
            return Err(Error::invalid(format!("node type `{name}` has no labeled training nodes")));
        }
        Ok(Self {
            config,
            target,
            train,
            val: labeled_nodes(parts, target, pick(Split::Val)),
            test: labeled_nodes(parts, target, pick(Split::Test)),
            exclusion: eval_exclusion(meta, config.exclude_eval_edges),
        })
    }
}

impl TaskRunner for NcTask<'_> {
    fn metric(&self) -> &'static str {
        "accuracy"
    }

    fn num_train(&self) -> usize {
        self.train.len()
    }

    fn step(&self, model: &ModelState, ctx: &WorkerContext, input: StepInput<'_>, hooks: &TrainHooks<'_>) -> Result<(f64, Grads)> {
        let mut grads = Grads::new();
        if input.mine.is_empty() {
            return Ok((0.0, grads));
        }
        let mut seeds = vec![Vec::new(); model.spec.node_types.len()];
        seeds[self.target] = input.mine.iter().map(|&i| self.train[i].0).collect();
        let labels: Vec<i32> = input.mine.iter().map(|&i| self.train[i].1).collect();
        let mb = build_blocks(ctx, &seeds, &self.config.fanout, input.batch_seed, &self.exclusion)?;
        if let Some(f) = hooks.on_batch {
            f(&BatchView {
                worker: ctx.worker_id,
                epoch: input.epoch,
                step: input.step,
                targets: &[],
                blocks: &mb,
            });
        }
        let (out, cache) = model.encode(&mb)?;
        let (w, b) = model.classifier_params()?;
        let cls = classifier_forward_loss(out[self.target].view(), w, b, &labels)?;
        let n = labels.len() as f64;
        grads.add_dense(DECODER_WEIGHT, &(cls.d_w * n));
        grads.add_dense(DECODER_BIAS, &(cls.d_b * n).insert_axis(ndarray::Axis(0)));
        let mut d_out: Vec<Array2<f64>> = out.iter().map(|o| Array2::zeros(o.dim())).collect();
        d_out[self.target] = cls.d_h * n;
        model.encode_backward(&mb, &cache, d_out, &mut grads)?;
        Ok((cls.loss * n, grads))
    }

    fn evaluate(&self, model: &ModelState, ctx: &WorkerContext, sync: &WorkerSync, split: Split) -> Result<Option<f64>> {
        let items = match split {
            Split::Val => &self.val,
            Split::Test => &self.test,
        };
        if items.is_empty() {
            return Ok(None);
        }
        let h = worker_embeddings(model, ctx, sync, &self.exclusion)?;
        let mine = shard(items, ctx.worker_id, ctx.partition().num_parts());
        let mut rows = Array2::zeros((mine.len(), model.spec.hidden_dim));
        for (i, (g, _)) in mine.iter().enumerate() {
            rows.row_mut(i).assign(&h[self.target].row(*g as usize));
        }
        let (w, b) = model.classifier_params()?;
        let pred = argmax_rows(&classifier_logits(rows.view(), w, b));
        let hits = pred.iter().zip(&mine).filter(|(p, (_, y))| *p == y).count();
        let total = sync.sum(ctx.worker_id, vec![hits as f64, mine.len() as f64])?;
        Ok(Some(total[0] / total[1]))
    }
}

// ---------------------------------------------------------------------------
// Link prediction

struct LpTask<'a> {
    config: &'a TrainConfig,
    rels: Vec<usize>,
    train: Vec<EdgeRef>,
    val: Vec<EdgeRef>,
    test: Vec<EdgeRef>,
    base: Arc<ExclusionSet>,
    eval: Arc<ExclusionSet>,
    /// Known edges per target relation, for filtered ranking.
    known: Option<HashMap<usize, HashSet<(u64, u64)>>>,
}

impl<'a> LpTask<'a> {
    fn new(parts: &[Arc<Partition>], config: &'a TrainConfig, meta: &GraphMeta) -> Result<Self> {
        let rels = config
            .target_etypes()
            .iter()
            .map(|r| meta.relation(r).ok_or_else(|| Error::invalid(format!("target_etype ({r}) is not in the graph"))))
            .collect::<Result<Vec<_>>>()?;
        for &r in &rels {
            if !meta.relations[r].has_split {
                return Err(Error::invalid(format!("relation ({}) has no link prediction split", meta.relations[r].relation)));
            }
        }
        if config.negative_sampler == SamplerKind::InBatch && config.batch_size < 2 && config.inbatch_fallback.is_none() {
            return Err(Error::invalid("in_batch negatives with batch_size 1 need inbatch_fallback"));
        }
        let train = split_edges(parts, &rels, |m, i| m.train[i]);
        if train.is_empty() {
            return Err(Error::invalid("target relations have no training edges"));
        }
        let known = config.mrr_filtered.then(|| {
            let mut known: HashMap<usize, HashSet<(u64, u64)>> = HashMap::new();
            for e in split_edges(parts, &rels, |_, _| true) {
                known.entry(e.rel).or_default().insert((e.src, e.dst));
            }
            known
        });
        Ok(Self {
            config,
            val: split_edges(parts, &rels, pick(Split::Val)),
            test: split_edges(parts, &rels, pick(Split::Test)),
            rels,
            train,
            base: eval_exclusion(meta, config.exclude_eval_edges),
            eval: eval_exclusion(meta, true),
            known,
        })
    }
}

/// Gradient accumulator over per-type encoder outputs addressed by global id.
struct RowGrads<'a> {
    index: Vec<HashMap<u64, usize>>,
    out: &'a [Array2<f64>],
    d: Vec<Array2<f64>>,
}

impl<'a> RowGrads<'a> {
    fn new(mb: &MiniBatchBlocks, out: &'a [Array2<f64>]) -> Self {
        Self {
            index: mb.seeds.iter().map(|s| s.iter().enumerate().map(|(i, &g)| (g, i)).collect()).collect(),
            out,
            d: out.iter().map(|o| Array2::zeros(o.dim())).collect(),
        }
    }

    fn row(&self, t: usize, g: u64) -> &[f64] {
        self.out[t].row(self.index[t][&g]).to_slice().expect("contiguous")
    }

    fn add(&mut self, t: usize, g: u64, v: &[f64]) {
        let i = self.index[t][&g];
        let mut row = self.d[t].row_mut(i);
        for (a, x) in row.iter_mut().zip(v) {
            *a += x;
        }
    }
}

impl TaskRunner for LpTask<'_> {
    fn metric(&self) -> &'static str {
        "mrr"
    }

    fn num_train(&self) -> usize {
        self.train.len()
    }

    fn step(&self, model: &ModelState, ctx: &WorkerContext, mut input: StepInput<'_>, hooks: &TrainHooks<'_>) -> Result<(f64, Grads)> {
        let meta = &model.spec;
        let config = self.config;
        let targets: Vec<EdgeRef> = input.batch.iter().map(|&i| self.train[i]).collect();
        let mut grads = Grads::new();
        if input.mine.is_empty() {
            return Ok((0.0, grads));
        }
        let exclusion = if config.exclude_training_targets {
            let mut ex = (*self.base).clone();
            for &r in &self.rels {
                let (src, dst): (Vec<u64>, Vec<u64>) = targets.iter().filter(|e| e.rel == r).map(|e| (e.src, e.dst)).unzip();
                ex.add_targets(&ctx.partition().meta, r, &src, &dst, config.exclude_reverse);
            }
            Arc::new(ex)
        } else {
            self.base.clone()
        };

        // Positives grouped by relation, with their negatives.
        let part = ctx.partition();
        let mut groups = Vec::new();
        for &r in &self.rels {
            let mut pos: Vec<EdgeRef> = input.mine.iter().map(|&i| self.train[i]).filter(|e| e.rel == r).collect();
            if pos.is_empty() {
                continue;
            }
            if config.negative_sampler == SamplerKind::InBatch && config.inbatch_fallback.is_none() && pos.len() == 1 {
                log::debug!("dropping a lone in-batch positive without fallback");
                pos.clear();
                continue;
            }
            let dst_type = meta.relations[r].dst_type;
            let pos_dst: Vec<u64> = pos.iter().map(|e| e.dst).collect();
            let universe = DrawUniverse {
                num_dst: part.meta.node_types[dst_type].count,
                local_dst: part.global_ids(dst_type),
            };
            let negs = sample_negatives(config.negative_sampler, config.inbatch_fallback, &pos_dst, config.num_negatives, universe, &mut input.rng)?;
            groups.push((r, pos, negs));
        }
        let mut seeds = vec![Vec::new(); meta.node_types.len()];
        for (r, pos, negs) in &groups {
            let (s, d) = (meta.relations[*r].src_type, meta.relations[*r].dst_type);
            seeds[s].extend(pos.iter().map(|e| e.src));
            seeds[d].extend(pos.iter().map(|e| e.dst));
            seeds[d].extend(negs.iter().flatten());
        }
        if groups.is_empty() {
            return Ok((0.0, grads));
        }
        let mb = build_blocks(ctx, &seeds, &config.fanout, input.batch_seed, &exclusion)?;
        if let Some(f) = hooks.on_batch {
            f(&BatchView {
                worker: ctx.worker_id,
                epoch: input.epoch,
                step: input.step,
                targets: &targets,
                blocks: &mb,
            });
        }
        let (out, cache) = model.encode(&mb)?;
        let mut rows = RowGrads::new(&mb, &out);
        let h = meta.hidden_dim;
        let mut loss_sum = 0.0;
        for (r, pos, negs) in &groups {
            let (st, dt) = (meta.relations[*r].src_type, meta.relations[*r].dst_type);
            let rel_vec = model.relation_vector(*r)?;
            let scores = LpScores {
                pos: pos.iter().map(|e| score(rows.row(st, e.src), rel_vec, rows.row(dt, e.dst))).collect(),
                neg: pos
                    .iter()
                    .zip(negs)
                    .map(|(e, ns)| ns.iter().map(|&v| score(rows.row(st, e.src), rel_vec, rows.row(dt, v))).collect())
                    .collect(),
            };
            let weights: Vec<f64> = pos.iter().map(|e| e.weight).collect();
            let lo = compute_loss(config.loss, &scores, &weights, config.zero_negative_weights, config.contrastive_temperature)?;
            let n = pos.len() as f64;
            loss_sum += lo.loss * n;
            let mut d_rel = rel_vec.map(|_| vec![0.0; h]);
            let (mut da, mut db) = (vec![0.0; h], vec![0.0; h]);
            let mut backprop = |rows: &mut RowGrads<'_>, u: u64, v: u64, ds: f64, d_rel: Option<&mut Vec<f64>>| {
                if ds == 0.0 {
                    return;
                }
                da.iter_mut().for_each(|x| *x = 0.0);
                db.iter_mut().for_each(|x| *x = 0.0);
                score_backward(rows.row(st, u), rel_vec, rows.row(dt, v), ds * n, &mut da, &mut db, d_rel.map(|d| d.as_mut_slice()));
                rows.add(st, u, &da);
                rows.add(dt, v, &db);
            };
            for (i, e) in pos.iter().enumerate() {
                backprop(&mut rows, e.src, e.dst, lo.d_pos[i], d_rel.as_mut());
                for (j, &v) in negs[i].iter().enumerate() {
                    backprop(&mut rows, e.src, v, lo.d_neg[i][j], d_rel.as_mut());
                }
            }
            if let Some(d) = d_rel {
                grads.add_dense(&decoder_rel(&meta.relations[*r].relation), &Array2::from_shape_vec((1, h), d).expect("shape"));
            }
        }
        let d_out = rows.d;
        model.encode_backward(&mb, &cache, d_out, &mut grads)?;
        Ok((loss_sum, grads))
    }

    fn evaluate(&self, model: &ModelState, ctx: &WorkerContext, sync: &WorkerSync, split: Split) -> Result<Option<f64>> {
        let items = match split {
            Split::Val => &self.val,
            Split::Test => &self.test,
        };
        if items.is_empty() {
            return Ok(None);
        }
        let h = worker_embeddings(model, ctx, sync, &self.eval)?;
        let spec = &model.spec;
        let mut rr = 0.0;
        let mine = shard(items, ctx.worker_id, ctx.partition().num_parts());
        for e in &mine {
            let (st, dt) = (spec.relations[e.rel].src_type, spec.relations[e.rel].dst_type);
            let num_dst = h[dt].nrows();
            let rel_vec = model.relation_vector(e.rel)?;
            let u = h[st].row(e.src as usize);
            let u = u.as_slice().expect("contiguous");
            let s = |v: u64| score(u, rel_vec, h[dt].row(v as usize).as_slice().expect("contiguous"));
            let mut cands = if self.config.mrr_full_ranking {
                (0..num_dst as u64).filter(|&v| v != e.dst).collect()
            } else {
                corruptions(self.config.rng_seed, e.rel, e.eid, self.config.eval_negatives, num_dst)
            };
            if let Some(known) = &self.known {
                let set = &known[&e.rel];
                cands.retain(|&v| !set.contains(&(e.src, v)));
            }
            let negs: Vec<f64> = cands.iter().map(|&v| s(v)).collect();
            rr += 1.0 / rank_of(s(e.dst), &negs) as f64;
        }
        let total = sync.sum(ctx.worker_id, vec![rr, mine.len() as f64])?;
        Ok(Some(total[0] / total[1]))
    }
}
