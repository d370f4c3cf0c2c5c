//! Single-step three-state MDP: `s0 --a1--> s1`, `s0 --a2--> s2`, no reward.

use rand::RngCore;

use super::{EnvStep, Environment};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mdp3State {
    S0 = 0,
    S1 = 1,
    S2 = 2,
}

impl Mdp3State {
    pub fn one_hot(self) -> Vec<f64> {
        let mut v = vec![0.0; 3];
        v[self as usize] = 1.0;
        v
    }
}

#[derive(Clone, Debug)]
pub struct ThreeStateMdp {
    state: Mdp3State,
}

impl Default for ThreeStateMdp {
    fn default() -> Self {
        Self { state: Mdp3State::S0 }
    }
}

impl ThreeStateMdp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> Mdp3State {
        self.state
    }
}

impl Environment for ThreeStateMdp {
    fn obs_dim(&self) -> usize {
        3
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> EnvStep {
        self.state = Mdp3State::S0;
        EnvStep::start(self.state.one_hot())
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        if self.state != Mdp3State::S0 {
            return Err(Error::contract(format!("no actions are available in {:?}", self.state)));
        }
        self.state = match action {
            0 => Mdp3State::S1,
            1 => Mdp3State::S2,
            other => return Err(Error::contract(format!("mdp3 action {other} out of range"))),
        };
        Ok(EnvStep {
            observation: self.state.one_hot(),
            reward_ext: 0.0,
            terminated: true,
            truncated: false,
        })
    }
}
