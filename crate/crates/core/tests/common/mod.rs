#![allow(dead_code)]

use std::sync::Arc;

use hetgnn::engine::{Block, BlockEdges};
use hetgnn::gconstruct::ConstructedGraph;
use hetgnn::partition::{partitions_in_memory, random_partition, shuffle_to_partitions, Partition};
use hetgnn::util::DrawRng;
use ndarray::Array2;

/// Central differences of `f` at `x`, compared with `analytic` as
/// `||a - n|| / max(||a||, ||n||)`; 0 when both vanish.
pub fn fd_rel_error(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], eps: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut num = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + eps;
        let up = f(&xp);
        xp[i] = orig - eps;
        let down = f(&xp);
        xp[i] = orig;
        num[i] = (up - down) / (2.0 * eps);
    }
    let diff: f64 = analytic.iter().zip(&num).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = num.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale < 1e-12 {
        0.0
    } else {
        diff / scale
    }
}

pub fn rand_matrix(rows: usize, cols: usize, rng: &mut DrawRng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.uniform() * 2.0 - 1.0)
}

pub fn rand_vec(n: usize, rng: &mut DrawRng) -> Vec<f64> {
    (0..n).map(|_| rng.uniform() * 2.0 - 1.0).collect()
}

/// A random block over `types` node types and the given relations
/// `(src_type, dst_type)`.
pub fn random_block(rels: &[(usize, usize)], types: usize, rng: &mut DrawRng) -> Block {
    let num_dst: Vec<usize> = (0..types).map(|_| 1 + rng.index(3)).collect();
    let num_src: Vec<usize> = num_dst.iter().map(|&d| d + rng.index(4)).collect();
    let src = num_src.iter().enumerate().map(|(t, &n)| (0..n as u64).map(|i| i * 10 + t as u64).collect()).collect();
    let edges = rels
        .iter()
        .map(|&(s, d)| {
            let m = rng.index(6);
            let mut e = BlockEdges::default();
            for k in 0..m {
                e.src_idx.push(rng.index(num_src[s]) as u32);
                e.dst_idx.push(rng.index(num_dst[d]) as u32);
                e.eids.push(k as u64);
            }
            e
        })
        .collect();
    Block { src, num_dst, edges }
}

pub fn partitions(graph: &ConstructedGraph, parts: usize, seed: u64) -> Vec<Arc<Partition>> {
    let assign = random_partition(graph, parts, seed).unwrap();
    partitions_in_memory(shuffle_to_partitions(graph, &assign).unwrap()).unwrap()
}
