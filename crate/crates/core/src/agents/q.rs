//! Value-based learners: DQN, DQN with Q-proportional exploration, and soft Q-learning.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActMode, Losses, RewardScaling};
use crate::error::{Error, Result};
use crate::replay::Batch;
use crate::tensor::{argmax, log_sum_exp, Activation, AdamState, Categorical, Matrix, Mlp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    /// Uniform action with probability ε, greedy otherwise.
    EpsilonGreedy,
    /// With probability ε sample from `softmax(Q / T)`, greedy otherwise.
    EpsilonProportional,
    /// Always sample from `softmax(Q / T)`.
    Boltzmann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QTarget {
    /// `max_a Q′(s′, a)`
    Dqn,
    /// `T log Σ_a exp(Q′(s′, a) / T)`
    Sql,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub epsilon: f64,
    pub temperature: f64,
    pub explore: Exploration,
    pub target: QTarget,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            activation: Activation::Relu,
            gamma: 0.99,
            tau: 0.005,
            lr: 1e-3,
            epsilon: 0.1,
            temperature: 1.0,
            explore: Exploration::EpsilonGreedy,
            target: QTarget::Dqn,
        }
    }
}

impl QConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.epsilon)
            && self.temperature > 0.0
            && self.gamma > 0.0
            && self.gamma < 1.0
            && self.tau > 0.0
            && self.tau < 1.0
            && self.lr > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid Q-learning constants: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QAgent {
    q: Mlp,
    q_target: Mlp,
    opt: AdamState,
    config: QConfig,
    loss_weight: f64,
    update_count: u64,
}

impl QAgent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, num_actions: usize, config: QConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut layout = vec![obs_dim];
        layout.extend(&config.hidden);
        layout.push(num_actions);
        let q = Mlp::new(&layout, config.activation, rng)?;
        Ok(Self {
            opt: AdamState::new(&q),
            q_target: q.clone(),
            q,
            config,
            loss_weight: 1.0,
            update_count: 0,
        })
    }

    pub fn config(&self) -> &QConfig {
        &self.config
    }

    pub fn q(&self) -> &Mlp {
        &self.q
    }

    pub fn q_mut(&mut self) -> &mut Mlp {
        &mut self.q
    }

    pub fn q_target(&self) -> &Mlp {
        &self.q_target
    }

    pub fn q_target_mut(&mut self) -> &mut Mlp {
        &mut self.q_target
    }

    pub fn loss_weight(&self) -> f64 {
        self.loss_weight
    }

    pub fn set_loss_weight(&mut self, w: f64) {
        self.loss_weight = w;
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.q.forward(obs)
    }

    /// The Boltzmann distribution `softmax(Q / T)` at `obs`.
    pub fn distribution(&self, obs: &[f64]) -> Result<Categorical> {
        Categorical::boltzmann(&self.q_values(obs)?, self.config.temperature)
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<usize> {
        let q = self.q_values(obs)?;
        if mode == ActMode::Greedy {
            return Ok(argmax(&q));
        }
        let eps = self.config.epsilon;
        Ok(match self.config.explore {
            Exploration::EpsilonGreedy => {
                if rng.random::<f64>() < eps {
                    rng.random_range(0..q.len())
                } else {
                    argmax(&q)
                }
            }
            Exploration::EpsilonProportional => {
                if rng.random::<f64>() < eps {
                    Categorical::boltzmann(&q, self.config.temperature)?.sample(rng)
                } else {
                    argmax(&q)
                }
            }
            Exploration::Boltzmann => Categorical::boltzmann(&q, self.config.temperature)?.sample(rng),
        })
    }

    pub fn targets(&self, batch: &Batch, r_int: &[f64], scaling: RewardScaling) -> Result<Vec<f64>> {
        if r_int.len() != batch.len() {
            return Err(Error::contract(format!(
                "{} intrinsic rewards for a batch of {}",
                r_int.len(),
                batch.len()
            )));
        }
        let next = self.q_target.forward_batch(&batch.next_obs)?;
        let temp = self.config.temperature;
        Ok((0..batch.len())
            .map(|b| {
                let row = next.row(b);
                let value = match self.config.target {
                    QTarget::Dqn => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    QTarget::Sql => {
                        let scaled: Vec<f64> = row.iter().map(|q| q / temp).collect();
                        temp * log_sum_exp(&scaled)
                    }
                };
                let bootstrap = if batch.terminated[b] { 0.0 } else { self.config.gamma * value };
                scaling.beta_ext * batch.reward_ext[b] + scaling.beta_int * r_int[b] + bootstrap
            })
            .collect())
    }

    pub fn update(&mut self, batch: &Batch, scaling: RewardScaling) -> Result<Losses> {
        let r_int = batch
            .r_int
            .as_deref()
            .ok_or_else(|| Error::contract("batch carries no recomputed intrinsic rewards"))?;
        self.update_with(batch, r_int, scaling)
    }

    pub fn update_with(&mut self, batch: &Batch, r_int: &[f64], scaling: RewardScaling) -> Result<Losses> {
        if batch.is_empty() {
            return Err(Error::contract("empty training batch"));
        }
        if self.loss_weight == 0.0 {
            return Ok(Losses::frozen());
        }
        let y = self.targets(batch, r_int, scaling)?;
        let tape = self.q.forward_tape(batch.obs.clone())?;
        let out = tape.output();
        let n = batch.len() as f64;
        let mut grad = Matrix::zeros(out.rows(), out.cols());
        let mut loss = 0.0;
        for b in 0..batch.len() {
            let a = batch.actions[b];
            let err = out.get(b, a) - y[b];
            loss += err * err;
            grad.set(b, a, self.loss_weight * 2.0 * err / n);
        }
        let loss = loss / n;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!("q loss {loss}")));
        }
        let (grads, _) = self.q.backward_tape(&tape, &grad, false)?;
        self.opt.step(&mut self.q, &grads, self.config.lr)?;
        self.q_target.polyak_update(&self.q, self.config.tau)?;
        self.update_count += 1;
        Ok(Losses {
            critic: loss,
            actor: 0.0,
            applied: true,
            intrinsic_total: r_int.iter().map(|r| r.abs()).sum(),
        })
    }

    pub fn fingerprint(&self) -> u64 {
        self.q.fingerprint().rotate_left(13) ^ self.q_target.fingerprint()
    }
}
