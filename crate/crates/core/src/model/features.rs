use crate::gconstruct::FeatureMatrix;

/// Mean of the featured neighbors' feature rows; the zero vector when a node
/// has none. `neighbors[i]` lists rows of `features` adjacent to node `i`.
pub fn construct_features(neighbors: &[Vec<usize>], features: &FeatureMatrix) -> FeatureMatrix {
    let d = features.cols;
    let mut out = FeatureMatrix::zeros(neighbors.len(), d);
    let mut acc = vec![0.0f64; d];
    for (i, nbrs) in neighbors.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        acc.iter_mut().for_each(|a| *a = 0.0);
        for &j in nbrs {
            for (a, &x) in acc.iter_mut().zip(features.row(j)) {
                *a += f64::from(x);
            }
        }
        let n = nbrs.len() as f64;
        for (o, a) in out.data[i * d..(i + 1) * d].iter_mut().zip(&acc) {
            *o = (a / n) as f32;
        }
    }
    out
}
