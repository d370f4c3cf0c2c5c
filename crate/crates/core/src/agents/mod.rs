//! Off-policy learners that take their intrinsic rewards from outside.

mod q;
mod sac;

pub use q::{Exploration, QAgent, QConfig, QTarget};
pub use sac::{SacAgent, SacConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::{Batch, Transition};
use crate::tensor::Categorical;

/// Anything that maps an observation to an action distribution.
pub trait Policy {
    fn distribution(&self, obs: &[f64]) -> Result<Categorical>;

    fn act_with<R: Rng + ?Sized>(&self, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<usize>
    where
        Self: Sized,
    {
        let d = self.distribution(obs)?;
        Ok(match mode {
            ActMode::Sample => d.sample(rng),
            ActMode::Greedy => d.mode(),
        })
    }
}

impl Policy for SacAgent {
    fn distribution(&self, obs: &[f64]) -> Result<Categorical> {
        SacAgent::distribution(self, obs)
    }
}

impl Policy for QAgent {
    /// Boltzmann over Q; its mode is the greedy action.
    fn distribution(&self, obs: &[f64]) -> Result<Categorical> {
        QAgent::distribution(self, obs)
    }
}

impl Policy for Agent {
    fn distribution(&self, obs: &[f64]) -> Result<Categorical> {
        match self {
            Agent::Sac(a) => a.distribution(obs),
            Agent::Q(a) => a.distribution(obs),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActMode {
    #[default]
    Sample,
    Greedy,
}

/// Weights of the two reward streams in the Bellman target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardScaling {
    pub beta_ext: f64,
    pub beta_int: f64,
}

impl RewardScaling {
    pub fn new(beta_ext: f64, beta_int: f64) -> Self {
        Self { beta_ext, beta_int }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_ext.is_finite() && self.beta_int.is_finite() && self.beta_ext >= 0.0 && self.beta_int >= 0.0 {
            Ok(())
        } else {
            Err(Error::Invalid(format!("reward scales must be finite and nonnegative: {self:?}")))
        }
    }
}

impl Default for RewardScaling {
    fn default() -> Self {
        Self::new(1.0, 1.0)
    }
}

/// Losses reported by one update call.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Losses {
    pub critic: f64,
    pub actor: f64,
    /// False when the update was skipped by a zero loss weight.
    pub applied: bool,
    /// Sum of |r_int| over the batch the targets were built from.
    pub intrinsic_total: f64,
}

impl Losses {
    pub fn frozen() -> Self {
        Self::default()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentVariant {
    #[default]
    Sac,
    Dqn,
    /// DQN whose ε branch samples in proportion to `softmax(Q / T)`.
    DqnP,
    Sql,
}

impl std::str::FromStr for AgentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sac" => Ok(Self::Sac),
            "dqn" => Ok(Self::Dqn),
            "dqn_p" => Ok(Self::DqnP),
            "sql" => Ok(Self::Sql),
            other => Err(Error::Invalid(format!("unknown agent variant `{other}`"))),
        }
    }
}

/// Any of the learners behind one interface.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Agent {
    Sac(SacAgent),
    Q(QAgent),
}

impl Agent {
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<usize> {
        match self {
            Agent::Sac(a) => a.act(obs, mode, rng),
            Agent::Q(a) => a.act(obs, mode, rng),
        }
    }

    pub fn update_with(&mut self, batch: &Batch, r_int: &[f64], scaling: RewardScaling) -> Result<Losses> {
        match self {
            Agent::Sac(a) => a.update_with(batch, r_int, scaling),
            Agent::Q(a) => a.update_with(batch, r_int, scaling),
        }
    }

    pub fn loss_weight(&self) -> f64 {
        match self {
            Agent::Sac(a) => a.loss_weight(),
            Agent::Q(a) => a.loss_weight(),
        }
    }

    pub fn set_loss_weight(&mut self, w: f64) {
        match self {
            Agent::Sac(a) => a.set_loss_weight(w),
            Agent::Q(a) => a.set_loss_weight(w),
        }
    }

    pub fn update_count(&self) -> u64 {
        match self {
            Agent::Sac(a) => a.update_count(),
            Agent::Q(a) => a.update_count(),
        }
    }

    pub fn fingerprint(&self) -> u64 {
        match self {
            Agent::Sac(a) => a.fingerprint(),
            Agent::Q(a) => a.fingerprint(),
        }
    }

    pub fn as_sac(&self) -> Option<&SacAgent> {
        match self {
            Agent::Sac(a) => Some(a),
            Agent::Q(_) => None,
        }
    }
}

/// Releases a frozen agent once a collected transition carries positive
/// extrinsic reward. Never freezes it again. Returns the loss weight.
pub fn freeze_gate(agent: &mut Agent, fresh: &Transition) -> f64 {
    if agent.loss_weight() == 0.0 && fresh.reward_ext > 0.0 {
        agent.set_loss_weight(1.0);
    }
    agent.loss_weight()
}
