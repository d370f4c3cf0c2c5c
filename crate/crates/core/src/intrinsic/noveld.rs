//! Novelty difference between consecutive states, gated to the first visit
//! of the new state within the episode.

use super::count::EpisodicCounter;
use super::rnd::RndModel;
use crate::error::Result;
use crate::tensor::Matrix;

/// `max(nov_next − c · nov_current, 0)` if this is the first episodic visit, else 0.
pub fn noveld_bonus(nov_next: f64, nov_current: f64, c: f64, first_visit: bool) -> f64 {
    if first_visit {
        (nov_next - c * nov_current).max(0.0)
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct NovelD {
    rnd: RndModel,
    c: f64,
    episodic: EpisodicCounter,
}

impl NovelD {
    pub fn new(rnd: RndModel, c: f64) -> Self {
        Self {
            rnd,
            c,
            episodic: EpisodicCounter::new(),
        }
    }

    pub fn rnd(&self) -> &RndModel {
        &self.rnd
    }

    pub fn rnd_mut(&mut self) -> &mut RndModel {
        &mut self.rnd
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn episodic(&self) -> &EpisodicCounter {
        &self.episodic
    }

    pub fn begin_episode(&mut self, obs: &[f64]) {
        self.episodic.reset();
        self.episodic.visit(obs);
    }

    /// Collection path. Returns `(signal, first_visit)` where the signal is
    /// the bonus before the reward scale. Only `next_obs` enters the
    /// normalizer, so each collected observation is counted once.
    pub fn observe(&mut self, obs: &[f64], next_obs: &[f64]) -> Result<(f64, bool)> {
        let nov_next = self.rnd.observe(next_obs)?;
        let nov_cur = self.rnd.signal_from_raw(self.rnd.raw(obs)?);
        let first_visit = self.episodic.visit(next_obs) == 1;
        Ok((noveld_bonus(nov_next, nov_cur, self.c, first_visit), first_visit))
    }

    /// Read-only scaled bonus for replayed transitions.
    pub fn score(&self, obs: &Matrix, next_obs: &Matrix, first_visit: &[bool]) -> Result<Vec<f64>> {
        let cur = self.rnd.raw_batch(obs)?;
        let next = self.rnd.raw_batch(next_obs)?;
        let scale = self.rnd.config().scale;
        Ok(cur
            .iter()
            .zip(&next)
            .zip(first_visit)
            .map(|((c, n), fv)| {
                let nov_n = self.rnd.signal_from_raw(*n);
                let nov_c = self.rnd.signal_from_raw(*c);
                scale * noveld_bonus(nov_n, nov_c, self.c, *fv)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_cases() {
        assert_eq!(noveld_bonus(1.0, 4.0, 0.5, true), 0.0);
        assert!((noveld_bonus(1.0, 0.4, 0.5, true) - 0.8).abs() < 1e-15);
        assert_eq!(noveld_bonus(5.0, 0.0, 0.5, false), 0.0);
    }
}
