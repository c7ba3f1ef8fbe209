use crate::util::DrawRng;

/// Disjoint train/val/test membership. Entities in no mask are unassigned.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn empty(n: usize) -> Self {
        Self {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        let count = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (count(&self.train), count(&self.val), count(&self.test))
    }

    pub fn gather(&self, idx: &[usize]) -> SplitMasks {
        SplitMasks {
            train: idx.iter().map(|&i| self.train[i]).collect(),
            val: idx.iter().map(|&i| self.val[i]).collect(),
            test: idx.iter().map(|&i| self.test[i]).collect(),
        }
    }
}

fn floor_count(n: usize, fraction: f64) -> usize {
    // The epsilon keeps 10 * 0.8 from landing on 7.999...
    ((n as f64 * fraction) + 1e-9).floor().min(n as f64) as usize
}

/// Cuts a seeded permutation of `0..n` at the cumulative split fractions.
/// Train and val sizes round down; test takes the rest of the covered fraction.
pub fn assign_splits(n: usize, split_pct: [f64; 3], rng_seed: u64) -> SplitMasks {
    let mut order: Vec<usize> = (0..n).collect();
    DrawRng::new(rng_seed).shuffle(&mut order);
    let n_train = floor_count(n, split_pct[0]);
    let n_val = floor_count(n, split_pct[1]).min(n - n_train);
    let covered = floor_count(n, split_pct.iter().sum());
    let n_test = covered.saturating_sub(n_train + n_val);
    let mut masks = SplitMasks::empty(n);
    for (pos, &i) in order.iter().enumerate() {
        if pos < n_train {
            masks.train[i] = true;
        } else if pos < n_train + n_val {
            masks.val[i] = true;
        } else if pos < n_train + n_val + n_test {
            masks.test[i] = true;
        }
    }
    masks
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eighty_ten_ten_fractions() {
        assert_eq!(assign_splits(10, [0.8, 0.1, 0.1], 0).sizes(), (8, 1, 1));
    }

    #[test]
    fn partial_cover_leaves_unassigned() {
        assert_eq!(assign_splits(10, [0.5, 0.0, 0.0], 0).sizes(), (5, 0, 0));
    }

    #[test]
    fn deterministic() {
        assert_eq!(assign_splits(100, [0.6, 0.2, 0.2], 9), assign_splits(100, [0.6, 0.2, 0.2], 9));
        assert_ne!(assign_splits(100, [0.6, 0.2, 0.2], 9), assign_splits(100, [0.6, 0.2, 0.2], 10));
    }

    proptest! {
        #[test]
        fn disjoint(n in 0usize..300, a in 0u8..=50, b in 0u8..=25, c in 0u8..=25, seed in any::<u64>()) {
            let m = assign_splits(n, [a as f64 / 100.0, b as f64 / 100.0, c as f64 / 100.0], seed);
            for i in 0..n {
                prop_assert!(u8::from(m.train[i]) + u8::from(m.val[i]) + u8::from(m.test[i]) <= 1);
            }
            let (tr, va, _) = m.sizes();
            prop_assert_eq!(tr, (n as f64 * a as f64 / 100.0 + 1e-9).floor() as usize);
            prop_assert!(va <= (n as f64 * b as f64 / 100.0 + 1e-9).floor() as usize);
        }
    }
}
