use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::EnvConfig;
use crate::agents::{ActMode, Agent, Policy};
use crate::env::{DeepSea, Environment, GridNav};
use crate::error::{Error, Result};
use crate::tensor::{Categorical, Mlp};

pub fn make_env(cfg: &EnvConfig) -> Result<Box<dyn Environment>> {
    Ok(match cfg {
        EnvConfig::Gridnav(g) => Box::new(GridNav::new(g.clone())?),
        EnvConfig::Deepsea(d) => Box::new(DeepSea::new(d.clone())?),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub return_mean: f64,
    pub return_std: f64,
    /// Mean policy entropy over every visited state.
    pub entropy_mean: f64,
}

/// Rolls out `n_episodes` on freshly built environments and reports the
/// raw undiscounted returns.
pub fn evaluate<P: Policy, R: Rng>(
    policy: &P,
    env_cfg: &EnvConfig,
    n_episodes: usize,
    mode: ActMode,
    rng: &mut R,
) -> Result<EvalResult> {
    if n_episodes == 0 {
        return Err(Error::contract("evaluation needs at least one episode"));
    }
    let mut returns = Vec::with_capacity(n_episodes);
    let mut entropy_sum = 0.0;
    let mut visited = 0usize;
    for _ in 0..n_episodes {
        let mut env = make_env(env_cfg)?;
        let mut step = env.reset(rng);
        let mut total = 0.0;
        loop {
            let dist = policy.distribution(&step.observation)?;
            entropy_sum += dist.entropy();
            visited += 1;
            let action = match mode {
                ActMode::Sample => dist.sample(rng),
                ActMode::Greedy => dist.mode(),
            };
            step = env.step(action)?;
            total += step.reward_ext;
            if step.done() {
                break;
            }
        }
        returns.push(total);
    }
    let (return_mean, return_std) = mean_std(&returns);
    Ok(EvalResult {
        return_mean,
        return_std,
        entropy_mean: entropy_sum / visited as f64,
    })
}

/// Mean and population standard deviation. Values are summed in sorted
/// order so the result does not depend on the input order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / n).sqrt())
}

/// Acting part of a trained agent, small enough to store on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicySnapshot {
    /// Softmax over the network's logits.
    Logits(Mlp),
    /// Softmax over Q-values at a temperature.
    Boltzmann { q: Mlp, temperature: f64 },
}

impl PolicySnapshot {
    pub fn of(agent: &Agent) -> Self {
        match agent {
            Agent::Sac(a) => PolicySnapshot::Logits(a.policy().clone()),
            Agent::Q(a) => PolicySnapshot::Boltzmann {
                q: a.q().clone(),
                temperature: a.config().temperature,
            },
        }
    }
}

impl Policy for PolicySnapshot {
    fn distribution(&self, obs: &[f64]) -> Result<Categorical> {
        match self {
            PolicySnapshot::Logits(net) => Categorical::from_logits(&net.forward(obs)?),
            PolicySnapshot::Boltzmann { q, temperature } => Categorical::boltzmann(&q.forward(obs)?, *temperature),
        }
    }
}
