use std::collections::HashMap;
use std::sync::Arc;

use super::embed::eval_exclusion;
use super::workers::run_workers;
use crate::engine::{Cluster, GraphAccess};
use crate::error::Result;
use crate::gconstruct::{FeatureMatrix, FittedStats};
use crate::model::construct_features;
use crate::partition::{FeatureMeta, GraphMeta, Partition};
use crate::schema::{FeaturelessMode, TrainConfig};

/// Partitions as the model sees them: unchanged, or with constructed
/// features for featureless types when the config asks for it.
pub fn prepare_partitions(parts: &[Arc<Partition>], config: &TrainConfig) -> Result<Vec<Arc<Partition>>> {
    let meta = &parts[0].meta;
    if config.featureless == FeaturelessMode::Construct && meta.node_types.iter().any(|n| n.is_featureless()) {
        construct_featureless_inputs(parts, config.exclude_eval_edges)
    } else {
        Ok(parts.to_vec())
    }
}

/// Featured source types feeding each featureless type through in-edges.
fn sources(meta: &GraphMeta) -> Vec<Vec<usize>> {
    meta.node_types
        .iter()
        .enumerate()
        .map(|(t, n)| {
            if !n.is_featureless() {
                return Vec::new();
            }
            let mut s: Vec<usize> = meta
                .relations
                .iter()
                .filter(|r| r.dst_type == t && !meta.node_types[r.src_type].is_featureless())
                .map(|r| r.src_type)
                .collect();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect()
}

/// Gives every featureless node type the mean input features of its
/// featured in-neighbors, one block of columns per featured source type
/// (zeros when a node has no such neighbor). Types without featured
/// in-neighbors stay featureless.
pub fn construct_featureless_inputs(parts: &[Arc<Partition>], exclude_eval_edges: bool) -> Result<Vec<Arc<Partition>>> {
    let meta = parts[0].meta.clone();
    let sources = sources(&meta);
    let exclusion = eval_exclusion(&meta, exclude_eval_edges);
    let cluster = Cluster::start(parts.to_vec())?;
    let built = run_workers(&cluster, |ctx, _| {
        let part = ctx.partition();
        let mut out: Vec<Option<FeatureMatrix>> = vec![None; meta.node_types.len()];
        for (t, srcs) in sources.iter().enumerate() {
            if srcs.is_empty() {
                continue;
            }
            let owned = part.owned_count(t);
            let mut blocks = Vec::new();
            for &s in srcs {
                let mut uniq: Vec<u64> = Vec::new();
                let mut pos: HashMap<u64, usize> = HashMap::new();
                let mut neighbors = vec![Vec::new(); owned];
                for (r, rm) in meta.relations.iter().enumerate() {
                    if rm.dst_type != t || rm.src_type != s {
                        continue;
                    }
                    let store = part.rel(r);
                    for (l, nb) in neighbors.iter_mut().enumerate() {
                        for &e in store.in_edges(l) {
                            if exclusion.excludes(r, store, e as usize) {
                                continue;
                            }
                            let u = store.src[e as usize];
                            let next = uniq.len();
                            let i = *pos.entry(u).or_insert_with(|| {
                                uniq.push(u);
                                next
                            });
                            nb.push(i);
                        }
                    }
                }
                let feats = if uniq.is_empty() {
                    FeatureMatrix::zeros(0, meta.node_types[s].input_dim())
                } else {
                    ctx.fetch_features(s, &uniq)?
                };
                blocks.push(construct_features(&neighbors, &feats));
            }
            let cols: usize = blocks.iter().map(|b| b.cols).sum();
            let mut m = FeatureMatrix::zeros(owned, cols);
            for r in 0..owned {
                let mut off = 0;
                for b in &blocks {
                    m.data[r * cols + off..r * cols + off + b.cols].copy_from_slice(b.row(r));
                    off += b.cols;
                }
            }
            out[t] = Some(m);
        }
        Ok(out)
    })?;
    drop(cluster);
    let mut new_meta = (*meta).clone();
    for (t, srcs) in sources.iter().enumerate().filter(|(_, s)| !s.is_empty()) {
        new_meta.node_types[t].features = srcs
            .iter()
            .map(|&s| {
                let dim = meta.node_types[s].input_dim();
                FeatureMeta {
                    name: format!("mean_{}", meta.node_types[s].name),
                    dim,
                    stats: FittedStats::FloatVector { width: dim },
                }
            })
            .collect();
    }
    let new_meta = Arc::new(new_meta);
    parts
        .iter()
        .zip(built)
        .map(|(p, inputs)| p.with_inputs(new_meta.clone(), inputs).map(Arc::new))
        .collect()
}
