use std::collections::{BTreeMap, HashMap};

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::engine::{GradPayload, GradSet, SparseRows};
use crate::error::{Error, Result};
use crate::util::DrawRng;

/// A named parameter tensor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub rows: usize,
    pub cols: usize,
    #[serde(skip)]
    pub data: Vec<f64>,
    /// Embedding table: gradients and updates touch individual rows.
    pub sparse: bool,
    /// Never updated; produces no gradient.
    pub frozen: bool,
}

impl Param {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            sparse: false,
            frozen: false,
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            data: vec![value; rows * cols],
            ..Self::zeros(rows, cols)
        }
    }

    /// Glorot-uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    pub fn glorot(rows: usize, cols: usize, rng: &mut DrawRng) -> Self {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        Self {
            data: (0..rows * cols).map(|_| (2.0 * rng.uniform() - 1.0) * a).collect(),
            ..Self::zeros(rows, cols)
        }
    }

    /// N(0, std^2) entries.
    pub fn normal(rows: usize, cols: usize, std: f64, rng: &mut DrawRng) -> Self {
        Self {
            data: (0..rows * cols).map(|_| crate::synth::gaussian(rng) * std).collect(),
            ..Self::zeros(rows, cols)
        }
    }

    pub fn sparse(mut self) -> Self {
        self.sparse = true;
        self
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.rows, self.cols), &self.data).expect("param shape")
    }

    pub fn view_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        ArrayViewMut2::from_shape((self.rows, self.cols), &mut self.data).expect("param shape")
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn insert(&mut self, name: impl Into<String>, p: Param) {
        self.params.insert(name.into(), p);
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        self.params.get(name).ok_or_else(|| Error::invalid(format!("no parameter named `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param> {
        self.params.get_mut(name).ok_or_else(|| Error::invalid(format!("no parameter named `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Gradient accumulator for one step on one worker.
#[derive(Debug, Clone, Default)]
pub struct Grads {
    dense: BTreeMap<String, Array2<f64>>,
    sparse: BTreeMap<String, HashMap<u64, Vec<f64>>>,
}

impl Grads {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_dense(&mut self, name: &str, g: &Array2<f64>) {
        match self.dense.get_mut(name) {
            Some(acc) => *acc += g,
            None => {
                self.dense.insert(name.to_string(), g.clone());
            }
        }
    }

    pub fn add_row(&mut self, name: &str, row: u64, g: &[f64]) {
        let rows = self.sparse.entry(name.to_string()).or_default();
        match rows.get_mut(&row) {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, x)| *a += x),
            None => {
                rows.insert(row, g.to_vec());
            }
        }
    }

    pub fn dense(&self, name: &str) -> Option<&Array2<f64>> {
        self.dense.get(name)
    }

    pub fn rows(&self, name: &str) -> Option<&HashMap<u64, Vec<f64>>> {
        self.sparse.get(name)
    }

    /// Every trainable parameter appears: dense ones as full (possibly zero)
    /// tensors, sparse ones as their touched rows.
    pub fn into_gradset(self, params: &ParamStore) -> Result<GradSet> {
        let Grads { mut dense, mut sparse } = self;
        let mut out = GradSet::new();
        for (name, p) in params.iter() {
            if p.frozen {
                continue;
            }
            let payload = if p.sparse {
                GradPayload::Sparse(SparseRows::from_map(p.cols, sparse.remove(name).unwrap_or_default()))
            } else {
                match dense.remove(name) {
                    Some(g) => {
                        if g.dim() != (p.rows, p.cols) {
                            return Err(Error::Shape(format!("gradient of `{name}` is {:?}, parameter is {}x{}", g.dim(), p.rows, p.cols)));
                        }
                        GradPayload::Dense(g.into_iter().collect())
                    }
                    None => GradPayload::Dense(vec![0.0; p.len()]),
                }
            };
            out.insert(name.clone(), payload);
        }
        Ok(out)
    }
}

/// Multiplies every entry of a gradient set by `s`.
pub fn scale_gradset(g: &mut GradSet, s: f64) {
    for payload in g.values_mut() {
        match payload {
            GradPayload::Dense(v) => v.iter_mut().for_each(|x| *x *= s),
            GradPayload::Sparse(r) => r.values.iter_mut().for_each(|x| *x *= s),
        }
    }
}
