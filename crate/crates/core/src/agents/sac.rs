//! Discrete-action soft actor-critic with twin critics and a fixed temperature.
//!
//! The critic target takes the expectation over next actions under the
//! current policy instead of a single sampled action:
//!
//! `y = βᵉˣᵗ rᵉˣᵗ + βⁱⁿᵗ rⁱⁿᵗ + γ (1 − done) Σₐ π(a|s′) [min Q′(s′, a) − α log π(a|s′)]`

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActMode, Losses, RewardScaling};
use crate::error::{Error, Result};
use crate::replay::Batch;
use crate::tensor::{Activation, AdamState, Categorical, Matrix, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            activation: Activation::Relu,
            alpha: 0.3,
            gamma: 0.99,
            tau: 0.005,
            lr_actor: 3e-4,
            lr_critic: 1e-3,
        }
    }
}

impl SacConfig {
    /// Smaller networks, lower critic rate and temperature used on DeepSea.
    pub fn deepsea() -> Self {
        Self {
            hidden: vec![64, 64],
            alpha: 0.1,
            lr_critic: 3e-4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.gamma > 0.0
            && self.gamma < 1.0
            && self.tau > 0.0
            && self.tau < 1.0
            && self.lr_actor > 0.0
            && self.lr_critic > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid SAC constants: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SacAgent {
    policy: Mlp,
    q1: Mlp,
    q2: Mlp,
    q1_target: Mlp,
    q2_target: Mlp,
    opt_policy: AdamState,
    opt_q1: AdamState,
    opt_q2: AdamState,
    config: SacConfig,
    loss_weight: f64,
    update_count: u64,
}

fn sizes(obs_dim: usize, hidden: &[usize], out: usize) -> Vec<usize> {
    let mut s = vec![obs_dim];
    s.extend(hidden);
    s.push(out);
    s
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, num_actions: usize, config: SacConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = sizes(obs_dim, &config.hidden, num_actions);
        let policy = Mlp::new(&layout, config.activation, rng)?;
        let q1 = Mlp::new(&layout, config.activation, rng)?;
        let q2 = Mlp::new(&layout, config.activation, rng)?;
        Ok(Self {
            opt_policy: AdamState::new(&policy),
            opt_q1: AdamState::new(&q1),
            opt_q2: AdamState::new(&q2),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            config,
            loss_weight: 1.0,
            update_count: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn policy(&self) -> &Mlp {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut Mlp {
        &mut self.policy
    }

    pub fn critics(&self) -> [&Mlp; 2] {
        [&self.q1, &self.q2]
    }

    pub fn critics_mut(&mut self) -> [&mut Mlp; 2] {
        [&mut self.q1, &mut self.q2]
    }

    pub fn target_critics(&self) -> [&Mlp; 2] {
        [&self.q1_target, &self.q2_target]
    }

    pub fn target_critics_mut(&mut self) -> [&mut Mlp; 2] {
        [&mut self.q1_target, &mut self.q2_target]
    }

    pub fn num_actions(&self) -> usize {
        self.policy.output_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.input_dim()
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

    pub fn distribution(&self, obs: &[f64]) -> Result<Categorical> {
        Categorical::from_logits(&self.policy.forward(obs)?)
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<usize> {
        let dist = self.distribution(obs)?;
        Ok(match mode {
            ActMode::Sample => dist.sample(rng),
            ActMode::Greedy => dist.mode(),
        })
    }

    /// Soft Bellman targets for every transition of `batch`.
    pub fn targets(&self, batch: &Batch, r_int: &[f64], scaling: RewardScaling) -> Result<Vec<f64>> {
        if r_int.len() != batch.len() {
            return Err(Error::contract(format!(
                "{} intrinsic rewards for a batch of {}",
                r_int.len(),
                batch.len()
            )));
        }
        let logits = self.policy.forward_batch(&batch.next_obs)?;
        let t1 = self.q1_target.forward_batch(&batch.next_obs)?;
        let t2 = self.q2_target.forward_batch(&batch.next_obs)?;
        let alpha = self.config.alpha;
        let mut y = Vec::with_capacity(batch.len());
        for b in 0..batch.len() {
            let dist = Categorical::from_logits(logits.row(b))?;
            let soft_value: f64 = dist
                .probs()
                .iter()
                .zip(dist.log_probs())
                .zip(t1.row(b).iter().zip(t2.row(b)))
                .map(|((p, lp), (q1, q2))| p * (q1.min(*q2) - alpha * lp))
                .sum();
            let bootstrap = if batch.terminated[b] { 0.0 } else { self.config.gamma * soft_value };
            y.push(scaling.beta_ext * batch.reward_ext[b] + scaling.beta_int * r_int[b] + bootstrap);
        }
        Ok(y)
    }

    /// Actor objective `mean_b Σₐ π(a|s) [α log π(a|s) − min Q(s, a)]` and its
    /// gradient with respect to the policy parameters.
    pub fn actor_loss_and_grad(&self, obs: &Matrix) -> Result<(f64, Mlp)> {
        let q1 = self.q1.forward_batch(obs)?;
        let q2 = self.q2.forward_batch(obs)?;
        let tape = self.policy.forward_tape(obs.clone())?;
        let logits = tape.output();
        let n = obs.rows() as f64;
        let alpha = self.config.alpha;
        let mut grad = Matrix::zeros(logits.rows(), logits.cols());
        let mut loss = 0.0;
        for b in 0..obs.rows() {
            let dist = Categorical::from_logits(logits.row(b))?;
            let cost: Vec<f64> = dist
                .log_probs()
                .iter()
                .zip(q1.row(b).iter().zip(q2.row(b)))
                .map(|(lp, (a, c))| alpha * lp - a.min(*c))
                .collect();
            let expected: f64 = dist.probs().iter().zip(&cost).map(|(p, c)| p * c).sum();
            loss += expected;
            // d/dz_j Σₐ pₐ cₐ(z) = p_j (c_j − E[c]); the log-prob term contributes zero net
            for (j, g) in grad.row_mut(b).iter_mut().enumerate() {
                *g = dist.probs()[j] * (cost[j] - expected) / n;
            }
        }
        let (grads, _) = self.policy.backward_tape(&tape, &grad, false)?;
        Ok((loss / n, grads))
    }

    /// One gradient step on both critics and the actor, then Polyak averaging
    /// of the target critics. With `loss_weight == 0` nothing changes at all.
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
        let w = self.loss_weight;
        let y = self.targets(batch, r_int, scaling)?;
        let n = batch.len() as f64;

        let mut critic_losses = [0.0; 2];
        let lr_critic = self.config.lr_critic;
        for (k, (q, opt)) in [(&mut self.q1, &mut self.opt_q1), (&mut self.q2, &mut self.opt_q2)]
            .into_iter()
            .enumerate()
        {
            let tape = q.forward_tape(batch.obs.clone())?;
            let out = tape.output();
            let mut grad = Matrix::zeros(out.rows(), out.cols());
            let mut loss = 0.0;
            for b in 0..batch.len() {
                let a = batch.actions[b];
                let err = out.get(b, a) - y[b];
                loss += err * err;
                grad.set(b, a, w * 2.0 * err / n);
            }
            let loss = loss / n;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(format!("critic {} loss {loss}", k + 1)));
            }
            critic_losses[k] = loss;
            let (grads, _) = q.backward_tape(&tape, &grad, false)?;
            opt.step(q, &grads, lr_critic)?;
        }

        let (actor_loss, mut actor_grads) = self.actor_loss_and_grad(&batch.obs)?;
        if !actor_loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!("actor loss {actor_loss}")));
        }
        if w != 1.0 {
            actor_grads.scale(w);
        }
        self.opt_policy.step(&mut self.policy, &actor_grads, self.config.lr_actor)?;

        self.q1_target.polyak_update(&self.q1, self.config.tau)?;
        self.q2_target.polyak_update(&self.q2, self.config.tau)?;
        self.update_count += 1;

        Ok(Losses {
            critic: 0.5 * (critic_losses[0] + critic_losses[1]),
            actor: actor_loss,
            applied: true,
            intrinsic_total: r_int.iter().map(|r| r.abs()).sum(),
        })
    }

    /// Mean squared TD error of critic `k` on `batch` against `targets`.
    pub fn critic_loss(&self, k: usize, batch: &Batch, targets: &[f64]) -> Result<f64> {
        let q = if k == 0 { &self.q1 } else { &self.q2 };
        let out = q.forward_batch(&batch.obs)?;
        let n = batch.len() as f64;
        Ok((0..batch.len())
            .map(|b| (out.get(b, batch.actions[b]) - targets[b]).powi(2))
            .sum::<f64>()
            / n)
    }

    /// Hash of every network, live and target.
    pub fn fingerprint(&self) -> u64 {
        [&self.policy, &self.q1, &self.q2, &self.q1_target, &self.q2_target]
            .iter()
            .fold(0u64, |acc, m| acc.rotate_left(13) ^ m.fingerprint())
    }
}
