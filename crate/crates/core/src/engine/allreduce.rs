use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gradient rows of an embedding table; `rows` sorted and unique,
/// `values` row-major with `width` columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseRows {
    pub width: usize,
    pub rows: Vec<u64>,
    pub values: Vec<f64>,
}

impl SparseRows {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            rows: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.width..(k + 1) * self.width]
    }

    /// Builds from unsorted (row, gradient) accumulations.
    pub fn from_map(width: usize, map: HashMap<u64, Vec<f64>>) -> Self {
        let mut entries: Vec<(u64, Vec<f64>)> = map.into_iter().collect();
        entries.sort_unstable_by_key(|e| e.0);
        let mut out = Self::new(width);
        for (r, v) in entries {
            debug_assert_eq!(v.len(), width);
            out.rows.push(r);
            out.values.extend_from_slice(&v);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GradPayload {
    Dense(Vec<f64>),
    Sparse(SparseRows),
}

/// One named gradient as it travels between workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradContribution {
    pub step: u64,
    pub name: String,
    pub payload: GradPayload,
}

/// A worker's full gradient for one step, keyed by parameter name.
pub type GradSet = BTreeMap<String, GradPayload>;

pub fn to_contributions(step: u64, grads: &GradSet) -> Vec<GradContribution> {
    grads
        .iter()
        .map(|(name, payload)| GradContribution {
            step,
            name: name.clone(),
            payload: payload.clone(),
        })
        .collect()
}

/// Dense gradients: elementwise mean over workers. Sparse rows: summed over
/// the workers that touched the row, divided by that count. Workers are
/// folded in index order, so the result is deterministic.
pub fn all_reduce_gradients(sets: &[GradSet]) -> Result<GradSet> {
    let first = sets.first().ok_or_else(|| Error::Worker("all-reduce with no workers".into()))?;
    for (w, s) in sets.iter().enumerate().skip(1) {
        if s.len() != first.len() || s.keys().zip(first.keys()).any(|(a, b)| a != b) {
            let a: Vec<&String> = first.keys().collect();
            let b: Vec<&String> = s.keys().collect();
            return Err(Error::Worker(format!("worker {w} sent gradients {b:?}, worker 0 sent {a:?}")));
        }
    }
    let n = sets.len() as f64;
    let mut out = GradSet::new();
    for (name, payload) in first {
        let reduced = match payload {
            GradPayload::Dense(v0) => {
                let mut acc = vec![0.0; v0.len()];
                for (w, s) in sets.iter().enumerate() {
                    match &s[name] {
                        GradPayload::Dense(v) if v.len() == acc.len() => {
                            for (a, x) in acc.iter_mut().zip(v) {
                                *a += x;
                            }
                        }
                        _ => return Err(Error::Worker(format!("worker {w}: gradient `{name}` differs in kind or length"))),
                    }
                }
                acc.iter_mut().for_each(|a| *a /= n);
                GradPayload::Dense(acc)
            }
            GradPayload::Sparse(s0) => {
                let width = s0.width;
                let mut acc: BTreeMap<u64, (Vec<f64>, u32)> = BTreeMap::new();
                for (w, s) in sets.iter().enumerate() {
                    match &s[name] {
                        GradPayload::Sparse(rows) if rows.width == width => {
                            for (k, &r) in rows.rows.iter().enumerate() {
                                let e = acc.entry(r).or_insert_with(|| (vec![0.0; width], 0));
                                for (a, x) in e.0.iter_mut().zip(rows.row(k)) {
                                    *a += x;
                                }
                                e.1 += 1;
                            }
                        }
                        _ => return Err(Error::Worker(format!("worker {w}: gradient `{name}` differs in kind or width"))),
                    }
                }
                let mut rows = SparseRows::new(width);
                for (r, (v, c)) in acc {
                    rows.rows.push(r);
                    rows.values.extend(v.into_iter().map(|x| x / c as f64));
                }
                GradPayload::Sparse(rows)
            }
        };
        out.insert(name.clone(), reduced);
    }
    Ok(out)
}

struct RvState<T, R> {
    generation: u64,
    slots: Vec<Option<T>>,
    arrived: usize,
    last: Option<Arc<R>>,
    aborted: Option<String>,
}

/// Barrier that collects one value per worker, reduces once, and hands the
/// shared result to every worker. No worker leaves before all arrive.
pub struct Rendezvous<T, R> {
    workers: usize,
    state: Mutex<RvState<T, R>>,
    cv: Condvar,
}

impl<T, R> std::fmt::Debug for Rendezvous<T, R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rendezvous").field("workers", &self.workers).finish()
    }
}

impl<T, R> Rendezvous<T, R> {
    pub fn new(workers: usize) -> Self {
        Self {
            workers,
            state: Mutex::new(RvState {
                generation: 0,
                slots: (0..workers).map(|_| None).collect(),
                arrived: 0,
                last: None,
                aborted: None,
            }),
            cv: Condvar::new(),
        }
    }

    /// Contributes `value` as `worker`; the last arrival runs `reduce` over
    /// all values in worker order.
    pub fn exchange(&self, worker: usize, value: T, reduce: impl FnOnce(Vec<T>) -> R) -> Result<Arc<R>> {
        let mut st = self.state.lock().map_err(|_| Error::Worker("rendezvous poisoned".into()))?;
        if let Some(why) = &st.aborted {
            return Err(Error::Worker(why.clone()));
        }
        if st.slots[worker].is_some() {
            return Err(Error::Worker(format!("worker {worker} contributed twice to one step")));
        }
        st.slots[worker] = Some(value);
        st.arrived += 1;
        let gen = st.generation;
        if st.arrived == self.workers {
            let values: Vec<T> = st.slots.iter_mut().map(|s| s.take().expect("all arrived")).collect();
            let result = Arc::new(reduce(values));
            st.last = Some(result.clone());
            st.arrived = 0;
            st.generation += 1;
            self.cv.notify_all();
            return Ok(result);
        }
        while st.generation == gen && st.aborted.is_none() {
            st = self.cv.wait(st).map_err(|_| Error::Worker("rendezvous poisoned".into()))?;
        }
        if st.generation == gen {
            return Err(Error::Worker(st.aborted.clone().unwrap_or_default()));
        }
        Ok(st.last.clone().expect("result published"))
    }

    /// Releases every waiting worker with an error; later calls fail too.
    pub fn abort(&self, why: &str) {
        if let Ok(mut st) = self.state.lock() {
            st.aborted.get_or_insert_with(|| why.to_string());
            self.cv.notify_all();
        }
    }
}

/// Synchronous gradient averaging across in-process workers.
pub type GradientSync = Rendezvous<GradSet, Result<GradSet>>;

impl GradientSync {
    pub fn all_reduce(&self, worker: usize, grads: GradSet) -> Result<GradSet> {
        let out = self.exchange(worker, grads, |sets| all_reduce_gradients(&sets))?;
        match out.as_ref() {
            Ok(g) => Ok(g.clone()),
            Err(e) => Err(Error::Worker(e.to_string())),
        }
    }
}
