use serde::{Deserialize, Serialize};

/// Smallest standard deviation used when normalizing.
pub const STD_FLOOR: f64 = 1e-8;

/// Welford running mean / sum of squared deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Population variance `m2 / count` (0 before any data).
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `x / max(std, 1e-8)`; the identity before any data was seen.
    /// No mean is subtracted, so non-negative inputs stay non-negative.
    pub fn normalize(&self, x: f64) -> f64 {
        if self.count == 0 {
            x
        } else {
            x / self.std().max(STD_FLOOR)
        }
    }

    /// Chan et al. parallel combination.
    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * nb / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / count as f64;
        RunningStats { count, mean, m2 }
    }
}

impl Extend<f64> for RunningStats {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        iter.into_iter().for_each(|x| self.update(x));
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_stream_has_zero_variance_and_uses_floor() {
        let s: RunningStats = [1.0, 1.0, 1.0].into_iter().collect();
        assert_eq!(s.mean(), 1.0);
        assert_eq!(s.variance(), 0.0);
        assert_eq!(s.normalize(1.0), 1.0 / STD_FLOOR);
    }

    #[test]
    fn two_point_case() {
        let s: RunningStats = [0.0, 2.0].into_iter().collect();
        assert_eq!(s.mean(), 1.0);
        assert_eq!(s.m2(), 2.0);
    }

    #[test]
    fn empty_normalize_is_identity() {
        assert_eq!(RunningStats::new().normalize(3.5), 3.5);
    }

    #[test]
    fn matches_two_pass_batch_statistics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..1000).map(|_| rng.random_range(-5.0..20.0)).collect();
        let s: RunningStats = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((s.mean() - mean).abs() < 1e-10);
        assert!((s.variance() - var).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn permutation_invariant(xs in prop::collection::vec(-1e3f64..1e3, 1..64), seed in any::<u64>()) {
            let a: RunningStats = xs.iter().copied().collect();
            let mut shuffled = xs.clone();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            let b: RunningStats = shuffled.into_iter().collect();
            prop_assert!((a.mean() - b.mean()).abs() < 1e-9);
            prop_assert!((a.m2() - b.m2()).abs() < 1e-9 * (1.0 + a.m2()));
        }

        #[test]
        fn merge_equals_concatenation(xs in prop::collection::vec(-50f64..50.0, 0..40),
                                      ys in prop::collection::vec(-50f64..50.0, 0..40)) {
            let a: RunningStats = xs.iter().copied().collect();
            let b: RunningStats = ys.iter().copied().collect();
            let all: RunningStats = xs.iter().chain(&ys).copied().collect();
            let merged = a.merge(&b);
            prop_assert_eq!(merged.count(), all.count());
            prop_assert!((merged.mean() - all.mean()).abs() < 1e-9);
            prop_assert!((merged.m2() - all.m2()).abs() < 1e-7);
        }
    }
}
