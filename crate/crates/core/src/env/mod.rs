//! Discrete sparse-reward environments behind one contract.

mod deepsea;
mod gridnav;
mod mdp3;

pub use deepsea::{DeepSea, DeepSeaConfig};
pub use gridnav::{GridAction, GridNav, GridNavConfig, Rect};
pub use mdp3::{Mdp3State, ThreeStateMdp};

use rand::RngCore;

use crate::error::Result;

/// Outcome of a reset or a step.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward_ext: f64,
    /// Absorbing end of the episode.
    pub terminated: bool,
    /// Time-limit end of the episode.
    pub truncated: bool,
}

impl EnvStep {
    pub(crate) fn start(observation: Vec<f64>) -> Self {
        Self {
            observation,
            reward_ext: 0.0,
            terminated: false,
            truncated: false,
        }
    }

    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Environment {
    fn obs_dim(&self) -> usize;

    fn num_actions(&self) -> usize;

    fn reset(&mut self, rng: &mut dyn RngCore) -> EnvStep;

    /// Errors when called after the episode ended or with an invalid action.
    fn step(&mut self, action: usize) -> Result<EnvStep>;
}
