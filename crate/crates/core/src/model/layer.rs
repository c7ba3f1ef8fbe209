use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::engine::Block;

/// Weights of one relational graph-convolution layer.
#[derive(Debug, Clone)]
pub struct LayerWeights<'a> {
    pub w_self: ArrayView2<'a, f64>,
    /// One matrix per relation, `d_in x d_out`.
    pub w_rel: Vec<ArrayView2<'a, f64>>,
    pub bias: ArrayView1<'a, f64>,
}

/// Endpoint node types of each relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelEnds {
    pub src_type: usize,
    pub dst_type: usize,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    inputs: Vec<Array2<f64>>,
    /// Mean-aggregated neighbor inputs per relation (`None` if no edges).
    agg: Vec<Option<Array2<f64>>>,
    /// 1 / sampled in-degree per destination row, per relation.
    inv_deg: Vec<Vec<f64>>,
    pre: Vec<Array2<f64>>,
    relu: bool,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub d_inputs: Vec<Array2<f64>>,
    pub d_w_self: Array2<f64>,
    pub d_w_rel: Vec<Array2<f64>>,
    pub d_bias: Array1<f64>,
}

/// `h'_v = act(W_self h_v + sum_r mean_{u in N_r(v)} W_r h_u + b)`, with the
/// mean taken over the block's sampled in-neighbors of each relation.
/// `inputs[t]` holds rows for `block.src[t]`; outputs hold rows for the
/// destination prefix.
pub fn layer_forward(w: &LayerWeights, block: &Block, rels: &[RelEnds], inputs: Vec<Array2<f64>>, relu: bool) -> (Vec<Array2<f64>>, LayerCache) {
    let mut agg = Vec::with_capacity(rels.len());
    let mut inv_deg = Vec::with_capacity(rels.len());
    for (r, ends) in rels.iter().enumerate() {
        let e = &block.edges[r];
        let n_dst = block.num_dst[ends.dst_type];
        if e.eids.is_empty() {
            agg.push(None);
            inv_deg.push(Vec::new());
            continue;
        }
        let mut deg = vec![0.0f64; n_dst];
        for &j in &e.dst_idx {
            deg[j as usize] += 1.0;
        }
        let inv: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
        let h = &inputs[ends.src_type];
        let mut a = Array2::<f64>::zeros((n_dst, h.ncols()));
        for (&i, &j) in e.src_idx.iter().zip(&e.dst_idx) {
            let scale = inv[j as usize];
            a.row_mut(j as usize).scaled_add(scale, &h.row(i as usize));
        }
        agg.push(Some(a));
        inv_deg.push(inv);
    }
    let self_rows: Vec<ArrayView2<f64>> = inputs.iter().zip(&block.num_dst).map(|(h, &n)| h.slice(s![..n, ..])).collect();
    let pre = combine(w, rels, &self_rows, &agg);
    let out = activate(&pre, relu);
    (
        out,
        LayerCache {
            inputs,
            agg,
            inv_deg,
            pre,
            relu,
        },
    )
}

/// The same layer when the per-relation neighbor means are already known:
/// `self_rows[t]` are the destination rows and `agg[r]` their mean
/// in-neighbor inputs over relation `r` (`None` without edges).
pub fn layer_forward_aggregated(w: &LayerWeights, rels: &[RelEnds], self_rows: &[ArrayView2<f64>], agg: &[Option<Array2<f64>>], relu: bool) -> Vec<Array2<f64>> {
    activate(&combine(w, rels, self_rows, agg), relu)
}

fn combine(w: &LayerWeights, rels: &[RelEnds], self_rows: &[ArrayView2<f64>], agg: &[Option<Array2<f64>>]) -> Vec<Array2<f64>> {
    let mut pre: Vec<Array2<f64>> = self_rows
        .iter()
        .map(|h| {
            let mut z = h.dot(&w.w_self);
            z += &w.bias;
            z
        })
        .collect();
    for (r, ends) in rels.iter().enumerate() {
        if let Some(a) = &agg[r] {
            pre[ends.dst_type] += &a.dot(&w.w_rel[r]);
        }
    }
    debug_assert!(pre.iter().all(|z| z.ncols() == w.w_self.ncols()));
    pre
}

fn activate(pre: &[Array2<f64>], relu: bool) -> Vec<Array2<f64>> {
    pre.iter().map(|z| if relu { z.mapv(|x| x.max(0.0)) } else { z.clone() }).collect()
}

/// Exact gradients of [`layer_forward`] given the upstream gradient of its outputs.
pub fn layer_backward(w: &LayerWeights, block: &Block, rels: &[RelEnds], cache: &LayerCache, d_out: &[Array2<f64>]) -> LayerGrads {
    let dz: Vec<Array2<f64>> = d_out
        .iter()
        .zip(&cache.pre)
        .map(|(g, z)| {
            if cache.relu {
                let mut g = g.clone();
                g.zip_mut_with(z, |gi, &zi| {
                    if zi <= 0.0 {
                        *gi = 0.0
                    }
                });
                g
            } else {
                g.clone()
            }
        })
        .collect();
    let mut d_inputs: Vec<Array2<f64>> = cache.inputs.iter().map(|h| Array2::zeros(h.dim())).collect();
    let mut d_w_self = Array2::<f64>::zeros(w.w_self.dim());
    let mut d_bias = Array1::<f64>::zeros(w.bias.len());
    for (t, g) in dz.iter().enumerate() {
        let n = block.num_dst[t];
        if n == 0 {
            continue;
        }
        d_w_self += &cache.inputs[t].slice(s![..n, ..]).t().dot(g);
        d_bias += &g.sum_axis(Axis(0));
        let mut dh = d_inputs[t].slice_mut(s![..n, ..]);
        dh += &g.dot(&w.w_self.t());
    }
    let mut d_w_rel = Vec::with_capacity(rels.len());
    for (r, ends) in rels.iter().enumerate() {
        let Some(a) = &cache.agg[r] else {
            d_w_rel.push(Array2::zeros(w.w_rel[r].dim()));
            continue;
        };
        let g = &dz[ends.dst_type];
        d_w_rel.push(a.t().dot(g));
        let d_agg = g.dot(&w.w_rel[r].t());
        let e = &block.edges[r];
        let inv = &cache.inv_deg[r];
        let dh = &mut d_inputs[ends.src_type];
        for (&i, &j) in e.src_idx.iter().zip(&e.dst_idx) {
            dh.row_mut(i as usize).scaled_add(inv[j as usize], &d_agg.row(j as usize));
        }
    }
    LayerGrads {
        d_inputs,
        d_w_self,
        d_w_rel,
        d_bias,
    }
}
