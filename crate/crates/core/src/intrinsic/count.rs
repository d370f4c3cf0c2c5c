use std::collections::HashMap;

/// Exact observation key: the bit patterns of every coordinate.
pub(crate) fn obs_key(obs: &[f64]) -> Vec<u64> {
    obs.iter().map(|v| v.to_bits()).collect()
}

/// Lifetime visit counts `N(s)`; the bonus for a visit is `1 / N(s)`.
#[derive(Clone, Debug, Default)]
pub struct VisitCounter {
    counts: HashMap<Vec<u64>, u64>,
}

impl VisitCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, obs: &[f64]) -> u64 {
        self.counts.get(&obs_key(obs)).copied().unwrap_or(0)
    }

    /// Records a visit to `next_obs` and returns `1 / N(next_obs)`.
    pub fn count_reward(&mut self, next_obs: &[f64]) -> f64 {
        let n = self.counts.entry(obs_key(next_obs)).or_insert(0);
        *n += 1;
        1.0 / *n as f64
    }

    /// Bonus under the current counts without recording a visit.
    pub fn peek_reward(&self, next_obs: &[f64]) -> f64 {
        1.0 / self.count(next_obs).max(1) as f64
    }
}

/// Per-episode visit counts, cleared at every episode start.
#[derive(Clone, Debug, Default)]
pub struct EpisodicCounter {
    counts: HashMap<Vec<u64>, u32>,
}

impl EpisodicCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.counts.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Increments and returns the new count.
    pub fn visit(&mut self, obs: &[f64]) -> u32 {
        let n = self.counts.entry(obs_key(obs)).or_insert(0);
        *n += 1;
        *n
    }

    pub fn count(&self, obs: &[f64]) -> u32 {
        self.counts.get(&obs_key(obs)).copied().unwrap_or(0)
    }
}
