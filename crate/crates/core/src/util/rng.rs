use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hash::mix64;

/// Seeded generator that counts index draws.
///
/// Samplers take ids through [`DrawRng::index`], so the draw count is the
/// number of node ids sampled. Raw bits used for shuffles and derived seeds
/// are not counted.
#[derive(Debug, Clone)]
pub struct DrawRng {
    inner: ChaCha8Rng,
    draws: u64,
}

impl DrawRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Stream for one worker at one step.
    pub fn for_step(global_seed: u64, worker_id: usize, step: u64) -> Self {
        Self::new(mix64(&[global_seed, worker_id as u64, step]))
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.draws += 1;
        self.inner.gen_range(0..n)
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn next_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// `k` distinct positions out of `0..n`, in sampled order. Counts `k` draws.
    pub fn choose_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        self.draws += k as u64;
        rand::seq::index::sample(&mut self.inner, n, k).into_vec()
    }

    pub fn inner_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_index_draws_only() {
        let mut rng = DrawRng::new(3);
        for _ in 0..5 {
            rng.index(10);
        }
        rng.next_seed();
        let mut v = vec![1, 2, 3];
        rng.shuffle(&mut v);
        assert_eq!(rng.draws(), 5);
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<usize> = {
            let mut r = DrawRng::new(42);
            (0..20).map(|_| r.index(1000)).collect()
        };
        let b: Vec<usize> = {
            let mut r = DrawRng::new(42);
            (0..20).map(|_| r.index(1000)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_choice() {
        let mut r = DrawRng::new(1);
        let mut picked = r.choose_distinct(10, 4);
        picked.sort_unstable();
        picked.dedup();
        assert_eq!(picked.len(), 4);
        assert_eq!(r.choose_distinct(3, 9).len(), 3);
    }
}
