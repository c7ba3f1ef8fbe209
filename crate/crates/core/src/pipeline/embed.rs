use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array2, Axis};

use super::workers::{run_workers, WorkerSync};
use crate::engine::{Cluster, ExclusionSet, GraphAccess, SampledEdges, WorkerContext};
use crate::error::Result;
use crate::gconstruct::FeatureMatrix;
use crate::model::{argmax_rows, classifier_logits, DecoderSpec, ModelState};
use crate::partition::{GraphMeta, Partition};
use crate::schema::Fanout;
use crate::util::binio;

/// Destination nodes per full-neighbor step.
const CHUNK: usize = 4096;

/// Exclusion used whenever embeddings are computed for evaluation or
/// export: validation and test link-prediction edges stay hidden.
pub(crate) fn eval_exclusion(meta: &GraphMeta, exclude_eval_edges: bool) -> Arc<ExclusionSet> {
    Arc::new(if exclude_eval_edges {
        ExclusionSet::eval_edges(meta)
    } else {
        ExclusionSet::none(meta.relations.len())
    })
}

/// Layer-wise full-neighbor encoding of every node. Each worker encodes the
/// nodes it owns; the per-layer outputs are gathered so every worker sees
/// the whole matrix for the next layer. Returns per-type matrices in global
/// id order.
pub(crate) fn worker_embeddings(model: &ModelState, ctx: &WorkerContext, sync: &WorkerSync, exclusion: &Arc<ExclusionSet>) -> Result<Arc<Vec<Array2<f64>>>> {
    let part = ctx.partition();
    let num_types = part.meta.node_types.len();
    let owned: Vec<Vec<u64>> = (0..num_types).map(|t| part.global_ids(t).to_vec()).collect();
    let inputs = (0..num_types)
        .map(|t| {
            let dim = part.meta.node_types[t].input_dim();
            if dim == 0 {
                Ok(FeatureMatrix::zeros(owned[t].len(), 0))
            } else {
                part.local_inputs(t, &owned[t])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (hs, _) = model.encode_inputs(&owned, &inputs)?;
    let mut global = sync.gather(ctx.worker_id, owned.iter().cloned().zip(hs).collect())?;
    let h = model.spec.hidden_dim;
    for l in 0..model.spec.num_layers {
        let mut out: Vec<Array2<f64>> = owned.iter().map(|o| Array2::zeros((o.len(), h))).collect();
        let chunks = owned.iter().map(|o| o.len().div_ceil(CHUNK)).max().unwrap_or(0);
        for c in 0..chunks {
            let seeds: Vec<Vec<u64>> = owned
                .iter()
                .map(|o| o[(c * CHUNK).min(o.len())..((c + 1) * CHUNK).min(o.len())].to_vec())
                .collect();
            let self_rows: Vec<Array2<f64>> = seeds.iter().enumerate().map(|(t, ids)| global[t].select(Axis(0), &as_index(ids))).collect();
            let agg = part
                .meta
                .relations
                .iter()
                .enumerate()
                .map(|(r, rm)| {
                    let dst = &seeds[rm.dst_type];
                    if dst.is_empty() {
                        return Ok(None);
                    }
                    let sampled = ctx.sample(r, dst, Fanout::ALL, 0, 0, exclusion)?;
                    Ok(mean_in_neighbors(&sampled, &global[rm.src_type]))
                })
                .collect::<Result<Vec<_>>>()?;
            let views: Vec<_> = self_rows.iter().map(|m| m.view()).collect();
            let rows = model.layer_step_aggregated(l, &views, &agg)?;
            for t in 0..num_types {
                let start = (c * CHUNK).min(owned[t].len());
                out[t].slice_mut(s![start..start + seeds[t].len(), ..]).assign(&rows[t]);
            }
        }
        global = sync.gather(ctx.worker_id, owned.iter().cloned().zip(out).collect())?;
    }
    Ok(global)
}

fn as_index(ids: &[u64]) -> Vec<usize> {
    ids.iter().map(|&g| g as usize).collect()
}

/// Mean of the sampled in-neighbor rows of each destination, accumulated in
/// edge order; `None` when no destination has an edge.
fn mean_in_neighbors(sampled: &SampledEdges, h: &Array2<f64>) -> Option<Array2<f64>> {
    if sampled.src.is_empty() {
        return None;
    }
    let n = sampled.num_dst();
    let mut a = Array2::<f64>::zeros((n, h.ncols()));
    for j in 0..n {
        let (src, _) = sampled.of(j);
        if src.is_empty() {
            continue;
        }
        let scale = 1.0 / src.len() as f64;
        let mut row = a.row_mut(j);
        for &u in src {
            row.scaled_add(scale, &h.row(u as usize));
        }
    }
    Some(a)
}

/// Full-neighbor embeddings of every node, per type in global id order.
pub fn infer_embeddings(parts: &[Arc<Partition>], model: &ModelState, exclude_eval_edges: bool) -> Result<Vec<Array2<f64>>> {
    let meta = parts.first().map(|p| p.meta.clone()).ok_or_else(|| crate::Error::invalid("no partitions"))?;
    let expected = model.spec.for_graph(&meta)?;
    model.check_compatible(&expected)?;
    let cluster = Cluster::start(parts.to_vec())?;
    let exclusion = eval_exclusion(&meta, exclude_eval_edges);
    let mut out = run_workers(&cluster, |ctx, sync| worker_embeddings(model, ctx, sync, &exclusion))?;
    let first = out.swap_remove(0);
    Ok(Arc::try_unwrap(first).unwrap_or_else(|a| a.as_ref().clone()))
}

/// Writes `<type>.emb.bin` (float32 matrix) and `<type>.ids.txt` per node
/// type; for a classifier also `<type>.pred.txt` and `<type>.probs.bin`
/// for the target type.
pub fn write_embeddings(dir: &Path, meta: &GraphMeta, model: &ModelState, embeddings: &[Array2<f64>], ids: &[Vec<String>]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    for (t, nt) in meta.node_types.iter().enumerate() {
        let m = &embeddings[t];
        let data: Vec<f32> = m.iter().map(|&x| x as f32).collect();
        binio::write_f32_matrix(&dir.join(format!("{}.emb.bin", nt.name)), m.nrows(), m.ncols(), &data)?;
        binio::write_lines(&dir.join(format!("{}.ids.txt", nt.name)), &ids[t])?;
    }
    if let DecoderSpec::Classifier { node_type, .. } = model.spec.decoder {
        let (w, b) = model.classifier_params()?;
        let logits = classifier_logits(embeddings[node_type].view(), w, b);
        let probs = softmax_rows(&logits);
        let name = &meta.node_types[node_type].name;
        let vocab = meta.node_types[node_type].label_vocab.as_ref();
        let lines = argmax_rows(&logits).into_iter().zip(&ids[node_type]).map(|(c, id)| {
            let label = vocab.and_then(|v| v.get(c as usize).cloned()).unwrap_or_else(|| c.to_string());
            format!("{id},{label}")
        });
        binio::write_lines(&dir.join(format!("{name}.pred.txt")), lines)?;
        let data: Vec<f32> = probs.iter().map(|&x| x as f32).collect();
        binio::write_f32_matrix(&dir.join(format!("{name}.probs.bin")), probs.nrows(), probs.ncols(), &data)?;
    }
    Ok(())
}

pub(crate) fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - m).exp());
        let z = row.sum();
        row /= z;
    }
    p
}
