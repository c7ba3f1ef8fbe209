use std::sync::{Arc, Mutex};

use ndarray::Array2;

use crate::engine::{Cluster, GradientSync, Rendezvous, WorkerContext};
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Barriers shared by the workers of one job.
#[derive(Debug)]
pub(crate) struct WorkerSync {
    pub grads: GradientSync,
    scalars: Rendezvous<Vec<f64>, Vec<f64>>,
    gather: Rendezvous<Vec<(Vec<u64>, Array2<f64>)>, Vec<Array2<f64>>>,
    first_error: Mutex<Option<Error>>,
}

impl WorkerSync {
    fn new(workers: usize) -> Self {
        Self {
            grads: GradientSync::new(workers),
            scalars: Rendezvous::new(workers),
            gather: Rendezvous::new(workers),
            first_error: Mutex::new(None),
        }
    }

    fn fail(&self, e: Error) {
        let why = e.to_string();
        if let Ok(mut slot) = self.first_error.lock() {
            slot.get_or_insert(e);
        }
        self.grads.abort(&why);
        self.scalars.abort(&why);
        self.gather.abort(&why);
    }

    /// Elementwise sum over workers, folded in worker order.
    pub fn sum(&self, worker: usize, values: Vec<f64>) -> Result<Vec<f64>> {
        let out = self.scalars.exchange(worker, values, |all| {
            let mut acc = vec![0.0; all.iter().map(Vec::len).max().unwrap_or(0)];
            for v in all {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            acc
        })?;
        Ok(out.as_ref().clone())
    }

    /// Assembles per-type matrices in global id order from each worker's
    /// `(ids, rows)` pieces.
    pub fn gather(&self, worker: usize, pieces: Vec<(Vec<u64>, Array2<f64>)>) -> Result<Arc<Vec<Array2<f64>>>> {
        self.gather.exchange(worker, pieces, |all| {
            let types = all.first().map_or(0, Vec::len);
            (0..types)
                .map(|t| {
                    let n: usize = all.iter().map(|p| p[t].0.len()).sum();
                    let d = all.iter().map(|p| p[t].1.ncols()).max().unwrap_or(0);
                    let mut out = Array2::zeros((n, d));
                    for p in &all {
                        let (ids, rows) = &p[t];
                        for (i, &g) in ids.iter().enumerate() {
                            out.row_mut(g as usize).assign(&rows.row(i));
                        }
                    }
                    out
                })
                .collect()
        })
    }
}

/// Runs `f` on one thread per partition and returns results in worker
/// order. The first failing worker's error is returned; the others are
/// released from any barrier they wait on.
pub(crate) fn run_workers<T: Send>(cluster: &Cluster, f: impl Fn(&WorkerContext, &WorkerSync) -> Result<T> + Sync) -> Result<Vec<T>> {
    let n = cluster.num_workers();
    let sync = WorkerSync::new(n);
    let results: Vec<Option<T>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .map(|w| {
                let (sync, f) = (&sync, &f);
                s.spawn(move || {
                    let ctx = cluster.worker(w);
                    match f(&ctx, sync) {
                        Ok(v) => Some(v),
                        Err(e) => {
                            sync.fail(e);
                            None
                        }
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
    });
    if let Some(e) = sync.first_error.into_inner().ok().flatten() {
        return Err(e);
    }
    Ok(results.into_iter().map(|r| r.expect("no error recorded")).collect())
}

/// Every `workers`-th item starting at `worker`.
pub(crate) fn shard<T: Clone>(items: &[T], worker: usize, workers: usize) -> Vec<T> {
    items.iter().skip(worker).step_by(workers).cloned().collect()
}

/// Labeled nodes of `node_type` selected by `pick` over the split masks,
/// as `(global id, label)` in global id order.
pub(crate) fn labeled_nodes(parts: &[Arc<Partition>], node_type: usize, pick: impl Fn(&crate::gconstruct::SplitMasks, usize) -> bool) -> Vec<(u64, i32)> {
    let mut out = Vec::new();
    for p in parts {
        let (Some(labels), Some(split)) = (p.labels(node_type), p.split(node_type)) else {
            continue;
        };
        for (l, &g) in p.global_ids(node_type).iter().enumerate() {
            if labels[l] >= 0 && pick(split, l) {
                out.push((g, labels[l]));
            }
        }
    }
    out.sort_unstable();
    out
}

/// One edge of a target relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRef {
    pub rel: usize,
    pub eid: u64,
    pub src: u64,
    pub dst: u64,
    pub weight: f64,
}

/// Edges of the given relations selected by `pick` over the split masks,
/// sorted by relation then edge id. Relations without splits select nothing.
pub(crate) fn split_edges(parts: &[Arc<Partition>], rels: &[usize], pick: impl Fn(&crate::gconstruct::SplitMasks, usize) -> bool) -> Vec<EdgeRef> {
    let mut out = Vec::new();
    for p in parts {
        for &r in rels {
            let store = p.rel(r);
            let Some(split) = &store.split else { continue };
            for i in 0..store.len() {
                if pick(split, i) {
                    out.push(EdgeRef {
                        rel: r,
                        eid: store.eids[i],
                        src: store.src[i],
                        dst: store.dst[i],
                        weight: store.weights.as_ref().map_or(1.0, |w| f64::from(w[i])),
                    });
                }
            }
        }
    }
    out.sort_unstable_by_key(|e| (e.rel, e.eid));
    out
}
