//! Random network distillation: novelty is the squared error between a
//! trainable predictor and a frozen, randomly initialised target network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{clip_grad_norm, Activation, AdamState, Matrix, Mlp, RunningStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RndConfig {
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub lr: f64,
    pub clip: f64,
    pub scale: f64,
    pub grad_clip: f64,
    pub activation: Activation,
}

impl Default for RndConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 32],
            embed_dim: 16,
            lr: 3e-4,
            clip: 2.0,
            scale: 0.5,
            grad_clip: 0.5,
            activation: Activation::Relu,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RndModel {
    target: Mlp,
    predictor: Mlp,
    adam: AdamState,
    norm: RunningStats,
    config: RndConfig,
}

impl RndModel {
    /// The two generators must be distinct streams so that the networks differ.
    pub fn new<R1, R2>(obs_dim: usize, config: RndConfig, target_rng: &mut R1, predictor_rng: &mut R2) -> Result<Self>
    where
        R1: Rng + ?Sized,
        R2: Rng + ?Sized,
    {
        if !(config.clip > 0.0 && config.scale > 0.0 && config.lr > 0.0 && config.grad_clip > 0.0) {
            return Err(Error::Invalid(format!("rnd constants must be positive: {config:?}")));
        }
        let mut sizes = vec![obs_dim];
        sizes.extend(&config.hidden);
        sizes.push(config.embed_dim);
        let target = Mlp::new(&sizes, config.activation, target_rng)?;
        let predictor = Mlp::new(&sizes, config.activation, predictor_rng)?;
        let adam = AdamState::new(&predictor);
        Ok(Self {
            target,
            predictor,
            adam,
            norm: RunningStats::new(),
            config,
        })
    }

    pub fn config(&self) -> &RndConfig {
        &self.config
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn predictor(&self) -> &Mlp {
        &self.predictor
    }

    pub fn predictor_mut(&mut self) -> &mut Mlp {
        &mut self.predictor
    }

    pub fn norm(&self) -> &RunningStats {
        &self.norm
    }

    pub fn obs_dim(&self) -> usize {
        self.target.input_dim()
    }

    /// `‖f̂(s) − f(s)‖²`.
    pub fn raw(&self, obs: &[f64]) -> Result<f64> {
        let p = self.predictor.forward(obs)?;
        let t = self.target.forward(obs)?;
        Ok(p.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    pub fn raw_batch(&self, obs: &Matrix) -> Result<Vec<f64>> {
        let p = self.predictor.forward_batch(obs)?;
        let t = self.target.forward_batch(obs)?;
        Ok(p.iter_rows()
            .zip(t.iter_rows())
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect())
    }

    /// Normalized and clipped novelty, before the reward scale.
    pub fn signal_from_raw(&self, raw: f64) -> f64 {
        self.norm.normalize(raw).min(self.config.clip)
    }

    pub fn reward_from_raw(&self, raw: f64) -> f64 {
        self.config.scale * self.signal_from_raw(raw)
    }

    /// Scaled intrinsic reward under the current statistics; read-only.
    pub fn reward(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.reward_from_raw(self.raw(obs)?))
    }

    /// Collection path: folds the raw error into the running statistics, then
    /// returns the normalized, clipped signal.
    pub fn observe(&mut self, obs: &[f64]) -> Result<f64> {
        let raw = self.raw(obs)?;
        self.norm.update(raw);
        Ok(self.signal_from_raw(raw))
    }

    /// One Adam step on the batch-mean prediction error. Returns the loss
    /// before the step.
    pub fn train(&mut self, obs: &Matrix) -> Result<f64> {
        if obs.rows() == 0 {
            return Err(Error::contract("rnd training batch is empty"));
        }
        let target = self.target.forward_batch(obs)?;
        let tape = self.predictor.forward_tape(obs.clone())?;
        let pred = tape.output();
        let n = obs.rows() as f64;
        let mut grad = Matrix::zeros(pred.rows(), pred.cols());
        let mut loss = 0.0;
        for ((g, p), t) in grad.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(target.as_slice()) {
            let d = p - t;
            loss += d * d;
            *g = 2.0 * d / n;
        }
        let (mut grads, _) = self.predictor.backward_tape(&tape, &grad, false)?;
        clip_grad_norm(&mut grads, self.config.grad_clip);
        self.adam.step(&mut self.predictor, &grads, self.config.lr)?;
        Ok(loss / n)
    }
}
