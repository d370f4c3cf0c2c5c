//! Coordination of a novelty-seeking agent and an extrinsic-only agent that
//! share one replay buffer.
//!
//! At every step the controller picks the acting agent from the intrinsic
//! signal of the previous transition: the extrinsic-only agent `S` acts when
//! the signal is strictly above `sigma`, the novelty agent `N` otherwise.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{freeze_gate, ActMode, Agent, Losses, RewardScaling};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::intrinsic::IntrinsicModel;
use crate::replay::{recompute_intrinsic, Batch, ReplayBuffer, Transition};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyId {
    /// Trained on extrinsic plus intrinsic reward.
    N,
    /// Trained on extrinsic reward only.
    S,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfig {
    pub sigma: f64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

impl SwitchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_nan() || self.sigma < 0.0 {
            return Err(Error::Invalid(format!("switch threshold must be nonnegative, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// `S` iff `r_int > sigma`.
pub fn select_policy(r_int: f64, cfg: SwitchConfig) -> Result<PolicyId> {
    if !r_int.is_finite() || r_int < 0.0 {
        return Err(Error::contract(format!("intrinsic reward must be finite and nonnegative, got {r_int}")));
    }
    Ok(if r_int > cfg.sigma { PolicyId::S } else { PolicyId::N })
}

/// Fraction of a recorded signal trace that would be handed to `S` at `sigma`.
pub fn trace_usage(trace: &[f64], sigma: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::contract("usage of an empty trace"));
    }
    let cfg = SwitchConfig { sigma };
    let mut s = 0usize;
    let mut last = 0.0;
    for &r in trace {
        if select_policy(last, cfg)? == PolicyId::S {
            s += 1;
        }
        last = r;
    }
    Ok(s as f64 / trace.len() as f64)
}

/// Knobs of the intrinsic-model training on fresh data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicSchedule {
    /// Predictor steps per 32 collected transitions.
    pub updates_per_32: u32,
    /// Number of most recent transitions in each predictor step.
    pub batch: usize,
}

impl Default for IntrinsicSchedule {
    fn default() -> Self {
        Self {
            updates_per_32: 32,
            batch: 1,
        }
    }
}

/// What happened during one collection step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub policy: PolicyId,
    pub action: usize,
    pub reward_ext: f64,
    /// Scaled intrinsic reward of the new observation.
    pub reward_int: f64,
    /// Unscaled signal that drives the next switching decision.
    pub signal: f64,
    /// Raw return of the episode that just ended, if one did.
    pub episode_return: Option<f64>,
    pub intrinsic_loss: Option<f64>,
}

/// Losses from one training tick.
#[derive(Clone, Debug, PartialEq)]
pub struct TickLosses {
    pub n: Losses,
    pub s: Option<Losses>,
    /// Buffer slots of the shared batch.
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct KeaState {
    agent_n: Agent,
    agent_s: Option<Agent>,
    switch: SwitchConfig,
    last_signal: f64,
    usage_s_count: u64,
    step_count: u64,
    obs: Option<Vec<f64>>,
    episode_return: f64,
    episodes: u64,
    intrinsic_schedule: IntrinsicSchedule,
    intrinsic_credit: u64,
    recent: VecDeque<Vec<f64>>,
}

impl KeaState {
    /// Full controller: `agent_s` starts frozen until the first positive
    /// extrinsic reward.
    pub fn new(agent_n: Agent, mut agent_s: Agent, switch: SwitchConfig) -> Result<Self> {
        switch.validate()?;
        agent_s.set_loss_weight(0.0);
        Ok(Self::build(agent_n, Some(agent_s), switch))
    }

    /// Single novelty-augmented agent; every step is taken by `N`.
    pub fn baseline(agent: Agent) -> Self {
        Self::build(agent, None, SwitchConfig { sigma: f64::INFINITY })
    }

    fn build(agent_n: Agent, agent_s: Option<Agent>, switch: SwitchConfig) -> Self {
        Self {
            agent_n,
            agent_s,
            switch,
            last_signal: 0.0,
            usage_s_count: 0,
            step_count: 0,
            obs: None,
            episode_return: 0.0,
            episodes: 0,
            intrinsic_schedule: IntrinsicSchedule::default(),
            intrinsic_credit: 0,
            recent: VecDeque::new(),
        }
    }

    pub fn with_intrinsic_schedule(mut self, schedule: IntrinsicSchedule) -> Result<Self> {
        if schedule.batch == 0 {
            return Err(Error::Invalid("intrinsic training batch must be positive".into()));
        }
        self.intrinsic_schedule = schedule;
        Ok(self)
    }

    pub fn agent_n(&self) -> &Agent {
        &self.agent_n
    }

    pub fn agent_n_mut(&mut self) -> &mut Agent {
        &mut self.agent_n
    }

    pub fn agent_s(&self) -> Option<&Agent> {
        self.agent_s.as_ref()
    }

    pub fn agent_s_mut(&mut self) -> Option<&mut Agent> {
        self.agent_s.as_mut()
    }

    pub fn switch(&self) -> SwitchConfig {
        self.switch
    }

    pub fn last_signal(&self) -> f64 {
        self.last_signal
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn usage_s_count(&self) -> u64 {
        self.usage_s_count
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn usage_fraction(&self) -> Result<f64> {
        if self.step_count == 0 {
            return Err(Error::contract("usage fraction before any step"));
        }
        Ok(self.usage_s_count as f64 / self.step_count as f64)
    }

    /// One environment step: choose the agent, act, store the transition,
    /// score it, train the intrinsic model on fresh data and consult the
    /// freeze gate.
    pub fn collect_step<R: Rng>(
        &mut self,
        env: &mut dyn Environment,
        intrinsic: &mut IntrinsicModel,
        buffer: &mut ReplayBuffer,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let obs = match self.obs.take() {
            Some(o) => o,
            None => {
                let start = env.reset(rng);
                intrinsic.begin_episode(&start.observation);
                self.episode_return = 0.0;
                start.observation
            }
        };

        let policy = select_policy(self.last_signal, self.switch)?;
        let actor = match (policy, &self.agent_s) {
            (PolicyId::S, Some(s)) => s,
            _ => &self.agent_n,
        };
        let action = actor.act(&obs, ActMode::Sample, rng)?;
        let step = env.step(action)?;
        let sample = intrinsic.collect(&obs, &step.observation)?;

        let transition = Transition {
            obs,
            action,
            reward_ext: step.reward_ext,
            next_obs: step.observation,
            terminated: step.terminated,
            truncated: step.truncated,
            behavior: policy,
            first_visit: sample.first_visit,
        };

        self.last_signal = sample.signal;
        self.step_count += 1;
        if policy == PolicyId::S {
            self.usage_s_count += 1;
        }
        if let Some(s) = self.agent_s.as_mut() {
            freeze_gate(s, &transition);
        }

        let intrinsic_loss = self.train_intrinsic(intrinsic, &transition.next_obs)?;

        self.episode_return += transition.reward_ext;
        let done = step.terminated || step.truncated;
        let episode_return = if done {
            self.episodes += 1;
            Some(self.episode_return)
        } else {
            self.obs = Some(transition.next_obs.clone());
            None
        };
        buffer.push(transition)?;

        Ok(StepOutcome {
            policy,
            action,
            reward_ext: step.reward_ext,
            reward_int: sample.reward,
            signal: sample.signal,
            episode_return,
            intrinsic_loss,
        })
    }

    fn train_intrinsic(&mut self, intrinsic: &mut IntrinsicModel, next_obs: &[f64]) -> Result<Option<f64>> {
        if !intrinsic.is_trainable() {
            return Ok(None);
        }
        let window = self.intrinsic_schedule.batch;
        if self.recent.len() == window {
            self.recent.pop_front();
        }
        self.recent.push_back(next_obs.to_vec());
        self.intrinsic_credit += u64::from(self.intrinsic_schedule.updates_per_32);
        let mut loss = None;
        if self.intrinsic_credit >= 32 {
            let rows: Vec<&[f64]> = self.recent.iter().map(Vec::as_slice).collect();
            let x = Matrix::from_rows(&rows)?;
            while self.intrinsic_credit >= 32 {
                self.intrinsic_credit -= 32;
                loss = intrinsic.train(&x)?;
            }
        }
        Ok(loss)
    }

    /// Trains both agents on one shared batch. `N` sees the recomputed
    /// intrinsic rewards, `S` sees zeros.
    pub fn train_tick<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        intrinsic: &IntrinsicModel,
        scaling: RewardScaling,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<TickLosses> {
        let indices = buffer.sample_indices(batch_size, rng)?;
        let rows: Vec<&Transition> = indices.iter().filter_map(|&i| buffer.get(i)).collect();
        let batch = Batch::from_transitions(&rows)?;
        let r_int = recompute_intrinsic(&batch, intrinsic)?;
        let n = self.agent_n.update_with(&batch, &r_int, scaling)?;
        let s = match self.agent_s.as_mut() {
            Some(agent) => Some(agent.update_with(&batch, &vec![0.0; batch.len()], scaling)?),
            None => None,
        };
        Ok(TickLosses { n, s, indices })
    }
}
