//! N×N DeepSea: descend one row per step while shifting left or right.
//!
//! Which action index means "right" is drawn per cell from `action_map_seed`,
//! so a fixed action sequence is not a solution. Moving right costs
//! `0.01 / N`; taking the right move from the bottom-right cell pays `+1`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvStep, Environment};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepSeaConfig {
    pub size: usize,
    /// `None` selects the identity map where action 1 always means right.
    pub action_map_seed: Option<u64>,
}

impl DeepSeaConfig {
    pub fn new(size: usize, action_map_seed: Option<u64>) -> Self {
        Self { size, action_map_seed }
    }

    pub fn move_cost(&self) -> f64 {
        0.01 / self.size as f64
    }

    pub fn goal_reward(&self) -> f64 {
        1.0
    }
}

#[derive(Clone, Debug)]
pub struct DeepSea {
    config: DeepSeaConfig,
    /// Per-cell action index that moves right.
    right_action: Vec<usize>,
    row: usize,
    col: usize,
}

impl DeepSea {
    pub fn new(config: DeepSeaConfig) -> Result<Self> {
        if config.size < 2 {
            return Err(Error::Invalid(format!("deepsea size must be at least 2, got {}", config.size)));
        }
        let n = config.size;
        let right_action = match config.action_map_seed {
            None => vec![1; n * n],
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n * n).map(|_| usize::from(rng.random::<bool>())).collect()
            }
        };
        Ok(Self {
            config,
            right_action,
            row: n,
            col: 0,
        })
    }

    pub fn config(&self) -> &DeepSeaConfig {
        &self.config
    }

    pub fn size(&self) -> usize {
        self.config.size
    }

    pub fn position(&self) -> (usize, usize) {
        (self.row, self.col)
    }

    /// The action index that moves right from `(row, col)`.
    pub fn right_action(&self, row: usize, col: usize) -> usize {
        self.right_action[row * self.config.size + col]
    }

    /// One-hot of the agent location; all zeros once the agent fell off the
    /// bottom row at episode end.
    pub fn observe(&self) -> Vec<f64> {
        let n = self.config.size;
        let mut obs = vec![0.0; n * n];
        if self.row < n {
            obs[self.row * n + self.col] = 1.0;
        }
        obs
    }
}

impl Environment for DeepSea {
    fn obs_dim(&self) -> usize {
        self.config.size * self.config.size
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> EnvStep {
        self.row = 0;
        self.col = 0;
        EnvStep::start(self.observe())
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let n = self.config.size;
        if self.row >= n {
            return Err(Error::contract("deepsea step after episode end"));
        }
        if action > 1 {
            return Err(Error::contract(format!("deepsea action {action} out of range")));
        }
        let right = action == self.right_action(self.row, self.col);
        let mut reward = 0.0;
        if right {
            if self.row == n - 1 && self.col == n - 1 {
                reward += self.config.goal_reward();
            }
            reward -= self.config.move_cost();
            self.col = (self.col + 1).min(n - 1);
        } else {
            self.col = self.col.saturating_sub(1);
        }
        self.row += 1;
        Ok(EnvStep {
            observation: self.observe(),
            reward_ext: reward,
            terminated: self.row == n,
            truncated: false,
        })
    }
}
