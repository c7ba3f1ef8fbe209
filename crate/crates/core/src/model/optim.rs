use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::engine::{GradPayload, GradSet};
use crate::error::{Error, Result};
use crate::schema::OptimizerKind;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// SGD or Adam. Sparse tables update touched rows only, values and moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Completed optimizer steps.
    pub step: u64,
    #[serde(skip)]
    pub m: BTreeMap<String, Vec<f64>>,
    #[serde(skip)]
    pub v: BTreeMap<String, Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// Applies one update. Nothing changes if any gradient is non-finite.
    pub fn apply(&mut self, params: &mut ParamStore, grads: &GradSet) -> Result<()> {
        for (name, g) in grads {
            let finite = match g {
                GradPayload::Dense(v) => v.iter().all(|x| x.is_finite()),
                GradPayload::Sparse(r) => r.values.iter().all(|x| x.is_finite()),
            };
            if !finite {
                return Err(Error::NonFinite(format!("gradient of `{name}`")));
            }
            let p = params.get(name)?;
            let ok = match g {
                GradPayload::Dense(v) => v.len() == p.len(),
                GradPayload::Sparse(r) => r.width == p.cols && r.rows.iter().all(|&i| (i as usize) < p.rows),
            };
            if !ok {
                return Err(Error::Shape(format!("gradient of `{name}` does not fit the parameter")));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (lr, kind) = (self.lr, self.kind);
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        for (name, g) in grads {
            let p = params.get_mut(name)?;
            if p.frozen {
                continue;
            }
            let width = p.cols;
            match kind {
                OptimizerKind::Sgd => match g {
                    GradPayload::Dense(v) => p.data.iter_mut().zip(v).for_each(|(x, gi)| *x -= lr * gi),
                    GradPayload::Sparse(r) => {
                        for (k, &row) in r.rows.iter().enumerate() {
                            let base = row as usize * width;
                            for (j, gi) in r.row(k).iter().enumerate() {
                                p.data[base + j] -= lr * gi;
                            }
                        }
                    }
                },
                OptimizerKind::Adam => {
                    let len = p.len();
                    let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; len]);
                    let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; len]);
                    let mut update = |i: usize, gi: f64| {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                        let mh = m[i] / bc1;
                        let vh = v[i] / bc2;
                        p.data[i] -= lr * mh / (vh.sqrt() + EPS);
                    };
                    match g {
                        GradPayload::Dense(gv) => gv.iter().enumerate().for_each(|(i, &gi)| update(i, gi)),
                        GradPayload::Sparse(r) => {
                            for (k, &row) in r.rows.iter().enumerate() {
                                let base = row as usize * width;
                                for (j, &gi) in r.row(k).iter().enumerate() {
                                    update(base + j, gi);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
