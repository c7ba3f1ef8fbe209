//! Link prediction math: negative samplers and losses over scored edges.
//!
//! Negatives are returned per positive as destination ids of the target
//! relation; the source of every negative is the positive's source.

use crate::schema::{LossKind, SamplerKind};
use crate::util::DrawRng;
use crate::{Error, Result};

/// Negative destination ids, one list per positive edge.
pub type Negatives = Vec<Vec<u64>>;

/// `n * k` independent uniform draws over `0..num_dst`.
pub fn sample_uniform(n: usize, k: usize, num_dst: usize, rng: &mut DrawRng) -> Result<Negatives> {
    if num_dst == 0 {
        return Err(Error::invalid("cannot sample negatives from an empty node type"));
    }
    Ok((0..n).map(|_| (0..k).map(|_| rng.index(num_dst) as u64).collect()).collect())
}

/// One shared draw of `k` ids per group of `k` consecutive positives. A
/// trailing partial group gets its own fresh draw of `k`.
pub fn sample_joint(n: usize, k: usize, num_dst: usize, rng: &mut DrawRng) -> Result<Negatives> {
    if num_dst == 0 {
        return Err(Error::invalid("cannot sample negatives from an empty node type"));
    }
    joint_from(n, k, rng, |rng| rng.index(num_dst) as u64)
}

/// [`sample_joint`] restricted to the caller's own destination nodes.
pub fn sample_local_joint(n: usize, k: usize, local_dst: &[u64], rng: &mut DrawRng) -> Result<Negatives> {
    if local_dst.is_empty() {
        return Err(Error::invalid("local_joint: this partition owns no destination nodes for the relation"));
    }
    joint_from(n, k, rng, |rng| local_dst[rng.index(local_dst.len())])
}

fn joint_from(n: usize, k: usize, rng: &mut DrawRng, mut draw: impl FnMut(&mut DrawRng) -> u64) -> Result<Negatives> {
    if k == 0 {
        return Err(Error::invalid("number of negatives must be >= 1"));
    }
    let mut out = Vec::with_capacity(n);
    for start in (0..n).step_by(k) {
        let group: Vec<u64> = (0..k).map(|_| draw(rng)).collect();
        for _ in start..(start + k).min(n) {
            out.push(group.clone());
        }
    }
    Ok(out)
}

/// Exchanges destinations inside the batch: positive `i` gets `v_j` for
/// every `j != i` in batch order, capped at `k`. Missing negatives come
/// from `fallback(n, missing)` when one is given.
pub fn sample_inbatch(
    pos_dst: &[u64],
    k: usize,
    fallback: Option<&mut dyn FnMut(usize, usize) -> Result<Negatives>>,
) -> Result<Negatives> {
    let b = pos_dst.len();
    if b == 1 && fallback.is_none() {
        return Err(Error::invalid("in_batch negatives need at least 2 positives or a fallback sampler"));
    }
    let mut out: Negatives = (0..b)
        .map(|i| {
            pos_dst
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .take(k)
                .collect()
        })
        .collect();
    let missing = k.saturating_sub(b.saturating_sub(1));
    if missing > 0 {
        if let Some(fallback) = fallback {
            for (negs, extra) in out.iter_mut().zip(fallback(b, missing)?) {
                negs.extend(extra);
            }
        }
    }
    Ok(out)
}

/// Where a sampler may draw destination ids from.
#[derive(Debug, Clone, Copy)]
pub struct DrawUniverse<'a> {
    pub num_dst: usize,
    pub local_dst: &'a [u64],
}

/// Dispatches on the configured sampler.
pub fn sample_negatives(
    kind: SamplerKind,
    fallback: Option<SamplerKind>,
    pos_dst: &[u64],
    k: usize,
    universe: DrawUniverse<'_>,
    rng: &mut DrawRng,
) -> Result<Negatives> {
    let n = pos_dst.len();
    match kind {
        SamplerKind::Uniform => sample_uniform(n, k, universe.num_dst, rng),
        SamplerKind::Joint => sample_joint(n, k, universe.num_dst, rng),
        SamplerKind::LocalJoint => sample_local_joint(n, k, universe.local_dst, rng),
        SamplerKind::InBatch => match fallback {
            None => sample_inbatch(pos_dst, k, None),
            Some(SamplerKind::InBatch) => Err(Error::invalid("in_batch fallback cannot be in_batch")),
            Some(f) => {
                let mut extra = |n: usize, m: usize| sample_negatives(f, None, &vec![0; n], m, universe, rng);
                sample_inbatch(pos_dst, k, Some(&mut extra))
            }
        },
    }
}

// ---------------------------------------------------------------------------
// Losses

/// Raw scores of a batch: one positive and its negatives per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpScores {
    pub pos: Vec<f64>,
    pub neg: Vec<Vec<f64>>,
}

/// Batch loss and its gradient with respect to every score.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossOutput {
    pub loss: f64,
    pub d_pos: Vec<f64>,
    pub d_neg: Vec<Vec<f64>>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binary cross-entropy of `sigmoid(s)` against `y`, and its derivative in `s`.
pub fn bce_with_logits(s: f64, y: f64) -> (f64, f64) {
    (softplus(s) - y * s, sigmoid(s) - y)
}

/// Each positive row contributes the mean loss over its `1 + K` edges; the
/// batch loss is the mean over rows.
pub fn loss_cross_entropy(scores: &LpScores) -> LossOutput {
    weighted(scores, None, 1.0)
}

/// Positive edge losses are scaled by `pos_weights`; negatives use
/// `neg_weight` (1, or 0 to reproduce the literal weighting rule).
pub fn loss_weighted_ce(scores: &LpScores, pos_weights: &[f64], neg_weight: f64) -> Result<LossOutput> {
    if pos_weights.len() != scores.pos.len() {
        return Err(Error::Shape(format!("{} weights for {} positives", pos_weights.len(), scores.pos.len())));
    }
    if let Some(w) = pos_weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::invalid(format!("edge weights must be >= 0, got {w}")));
    }
    Ok(weighted(scores, Some(pos_weights), neg_weight))
}

fn weighted(scores: &LpScores, pos_weights: Option<&[f64]>, neg_weight: f64) -> LossOutput {
    let n = scores.pos.len();
    let mut out = LossOutput {
        loss: 0.0,
        d_pos: vec![0.0; n],
        d_neg: scores.neg.iter().map(|r| vec![0.0; r.len()]).collect(),
    };
    if n == 0 {
        return out;
    }
    for i in 0..n {
        let w = pos_weights.map_or(1.0, |w| w[i]);
        let denom = (1 + scores.neg[i].len()) as f64 * n as f64;
        let (l, d) = bce_with_logits(scores.pos[i], 1.0);
        out.loss += w * l / denom;
        out.d_pos[i] = w * d / denom;
        for (j, &s) in scores.neg[i].iter().enumerate() {
            let (l, d) = bce_with_logits(s, 0.0);
            out.loss += neg_weight * l / denom;
            out.d_neg[i][j] = neg_weight * d / denom;
        }
    }
    out
}

/// Softmax cross-entropy of each positive against itself plus its
/// negatives, at temperature `tau`; mean over positives.
pub fn loss_contrastive(scores: &LpScores, tau: f64) -> LossOutput {
    let n = scores.pos.len();
    let mut out = LossOutput {
        loss: 0.0,
        d_pos: vec![0.0; n],
        d_neg: scores.neg.iter().map(|r| vec![0.0; r.len()]).collect(),
    };
    for i in 0..n {
        let (l, d_pos, d_neg) = contrastive_row(scores.pos[i], &scores.neg[i], tau);
        out.loss += l / n as f64;
        out.d_pos[i] = d_pos / n as f64;
        for (d, g) in out.d_neg[i].iter_mut().zip(d_neg) {
            *d = g / n as f64;
        }
    }
    out
}

/// Loss of one group and gradients before the batch mean.
pub fn contrastive_row(pos: f64, neg: &[f64], tau: f64) -> (f64, f64, Vec<f64>) {
    let m = neg.iter().copied().fold(pos, f64::max);
    let rel: Vec<f64> = neg.iter().map(|&s| ((s - m) / tau).exp()).collect();
    let pos_rel = ((pos - m) / tau).exp();
    let z = pos_rel + rel.iter().sum::<f64>();
    // Relative to the positive the sum is 1 + sum_j e^{(s_j - pos)/tau}.
    let loss = if m == pos {
        rel.iter().sum::<f64>().ln_1p()
    } else {
        (m - pos) / tau + z.ln()
    };
    let d_pos = (pos_rel / z - 1.0) / tau;
    let d_neg = rel.iter().map(|r| r / z / tau).collect();
    (loss, d_pos, d_neg)
}

/// Loss selected by configuration.
pub fn compute_loss(kind: LossKind, scores: &LpScores, pos_weights: &[f64], zero_negative_weights: bool, tau: f64) -> Result<LossOutput> {
    match kind {
        LossKind::CrossEntropy => Ok(loss_cross_entropy(scores)),
        LossKind::WeightedCrossEntropy => {
            loss_weighted_ce(scores, pos_weights, if zero_negative_weights { 0.0 } else { 1.0 })
        }
        LossKind::Contrastive => Ok(loss_contrastive(scores, tau)),
    }
}
