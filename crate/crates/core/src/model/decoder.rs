use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// `sum_k a[k] * b[k]`.
pub fn score_dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("dot of {} and {} dims", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// `sum_k a[k] * r[k] * b[k]`.
pub fn score_distmult(a: &[f64], rel: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != rel.len() {
        return Err(Error::Shape(format!("distmult of {}, {} and {} dims", a.len(), rel.len(), b.len())));
    }
    Ok(a.iter().zip(rel).zip(b).map(|((x, r), y)| x * r * y).sum())
}

/// Score with an optional relation vector (`None` = dot product).
pub fn score(a: &[f64], rel: Option<&[f64]>, b: &[f64]) -> f64 {
    match rel {
        Some(r) => a.iter().zip(r).zip(b).map(|((x, r), y)| x * r * y).sum(),
        None => a.iter().zip(b).map(|(x, y)| x * y).sum(),
    }
}

/// Adds `ds` times the score gradient to `da`, `db` and `dr`.
pub fn score_backward(a: &[f64], rel: Option<&[f64]>, b: &[f64], ds: f64, da: &mut [f64], db: &mut [f64], dr: Option<&mut [f64]>) {
    match rel {
        Some(r) => {
            for k in 0..a.len() {
                da[k] += ds * r[k] * b[k];
                db[k] += ds * r[k] * a[k];
            }
            if let Some(dr) = dr {
                for k in 0..a.len() {
                    dr[k] += ds * a[k] * b[k];
                }
            }
        }
        None => {
            for k in 0..a.len() {
                da[k] += ds * b[k];
                db[k] += ds * a[k];
            }
        }
    }
}

/// Softmax cross-entropy of `h W + b` against `labels`, averaged over rows.
#[derive(Debug, Clone)]
pub struct ClassifierOutput {
    pub loss: f64,
    pub logits: Array2<f64>,
    pub d_h: Array2<f64>,
    pub d_w: Array2<f64>,
    pub d_b: Array1<f64>,
}

pub fn classifier_logits(h: ArrayView2<f64>, w: ArrayView2<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let mut z = h.dot(&w);
    z += &b;
    z
}

pub fn classifier_forward_loss(h: ArrayView2<f64>, w: ArrayView2<f64>, b: ArrayView1<f64>, labels: &[i32]) -> Result<ClassifierOutput> {
    let c = w.ncols();
    if labels.len() != h.nrows() {
        return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), h.nrows())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y < 0 || y as usize >= c) {
        return Err(Error::invalid(format!("label {bad} outside [0, {c})")));
    }
    let logits = classifier_logits(h, w, b);
    let n = labels.len().max(1) as f64;
    let mut loss = 0.0;
    let mut dz = Array2::<f64>::zeros(logits.dim());
    for (i, row) in logits.axis_iter(Axis(0)).enumerate() {
        let m = row.fold(f64::NEG_INFINITY, |a, &x| a.max(x));
        let sum: f64 = row.iter().map(|&x| (x - m).exp()).sum();
        let lse = m + sum.ln();
        let y = labels[i] as usize;
        loss += lse - row[y];
        for k in 0..c {
            dz[[i, k]] = ((row[k] - lse).exp() - if k == y { 1.0 } else { 0.0 }) / n;
        }
    }
    let d_w = h.t().dot(&dz);
    let d_b = dz.sum_axis(Axis(0));
    let d_h = dz.dot(&w.t());
    Ok(ClassifierOutput {
        loss: loss / n,
        logits,
        d_h,
        d_w,
        d_b,
    })
}

/// Index of the largest entry per row (first on ties).
pub fn argmax_rows(m: &Array2<f64>) -> Vec<i32> {
    m.axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best as i32
        })
        .collect()
}
