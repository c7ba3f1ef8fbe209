use crate::error::{Error, Result};
use crate::util::{mix64, DrawRng};

/// Fraction of exact matches.
pub fn evaluate_accuracy(predictions: &[i32], labels: &[i32]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `1 + #{negatives scoring strictly above the positive}`.
pub fn rank_of(pos: f64, negatives: &[f64]) -> usize {
    1 + negatives.iter().filter(|&&s| s > pos).count()
}

/// Mean of `1 / rank`.
pub fn mean_reciprocal_rank(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::invalid("MRR of an empty set"));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

const CORRUPT_TAG: u64 = 0x6d72_725f_6e65_67;

/// Corrupting destinations for one evaluation edge. The draw depends only
/// on the seed and the edge, so it is identical across epochs and workers.
pub fn corruptions(rng_seed: u64, rel: usize, eid: u64, count: usize, num_dst: usize) -> Vec<u64> {
    let mut rng = DrawRng::new(mix64(&[rng_seed, CORRUPT_TAG, rel as u64, eid]));
    (0..count).map(|_| rng.index(num_dst) as u64).collect()
}
