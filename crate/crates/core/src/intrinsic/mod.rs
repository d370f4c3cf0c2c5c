//! Intrinsic-reward models.
//!
//! Every model reports two quantities on the collection path: the scaled
//! `reward` that enters the Bellman target and the unscaled `signal` (the
//! normalized, clipped novelty) that drives policy switching.

mod count;
mod noveld;
mod rnd;

pub use count::{EpisodicCounter, VisitCounter};
pub use noveld::{noveld_bonus, NovelD};
pub use rnd::{RndConfig, RndModel};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::Batch;
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntrinsicKind {
    /// No bonus; plain extrinsic learning.
    None,
    #[default]
    Rnd,
    Noveld,
    Count,
}

impl std::str::FromStr for IntrinsicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "rnd" => Ok(Self::Rnd),
            "noveld" => Ok(Self::Noveld),
            "count" => Ok(Self::Count),
            other => Err(Error::Invalid(format!("unknown intrinsic kind `{other}`"))),
        }
    }
}

/// Result of scoring one freshly collected transition.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntrinsicSample {
    pub reward: f64,
    pub signal: f64,
    pub first_visit: bool,
}

#[derive(Clone, Debug)]
pub enum IntrinsicModel {
    None,
    Rnd(RndModel),
    NovelD(NovelD),
    Count(VisitCounter),
}

impl IntrinsicModel {
    pub fn build<R1, R2>(
        kind: IntrinsicKind,
        obs_dim: usize,
        config: RndConfig,
        noveld_c: f64,
        target_rng: &mut R1,
        predictor_rng: &mut R2,
    ) -> Result<Self>
    where
        R1: Rng + ?Sized,
        R2: Rng + ?Sized,
    {
        Ok(match kind {
            IntrinsicKind::None => IntrinsicModel::None,
            IntrinsicKind::Rnd => IntrinsicModel::Rnd(RndModel::new(obs_dim, config, target_rng, predictor_rng)?),
            IntrinsicKind::Noveld => IntrinsicModel::NovelD(NovelD::new(
                RndModel::new(obs_dim, config, target_rng, predictor_rng)?,
                noveld_c,
            )),
            IntrinsicKind::Count => IntrinsicModel::Count(VisitCounter::new()),
        })
    }

    pub fn kind(&self) -> IntrinsicKind {
        match self {
            IntrinsicModel::None => IntrinsicKind::None,
            IntrinsicModel::Rnd(_) => IntrinsicKind::Rnd,
            IntrinsicModel::NovelD(_) => IntrinsicKind::Noveld,
            IntrinsicModel::Count(_) => IntrinsicKind::Count,
        }
    }

    /// The underlying distillation model, when there is one.
    pub fn rnd(&self) -> Option<&RndModel> {
        match self {
            IntrinsicModel::Rnd(m) => Some(m),
            IntrinsicModel::NovelD(m) => Some(m.rnd()),
            _ => None,
        }
    }

    pub fn begin_episode(&mut self, obs: &[f64]) {
        if let IntrinsicModel::NovelD(m) = self {
            m.begin_episode(obs);
        }
    }

    /// Collection path: updates normalizer and counters.
    pub fn collect(&mut self, obs: &[f64], next_obs: &[f64]) -> Result<IntrinsicSample> {
        Ok(match self {
            IntrinsicModel::None => IntrinsicSample {
                first_visit: true,
                ..Default::default()
            },
            IntrinsicModel::Rnd(m) => {
                let signal = m.observe(next_obs)?;
                IntrinsicSample {
                    reward: m.config().scale * signal,
                    signal,
                    first_visit: true,
                }
            }
            IntrinsicModel::NovelD(m) => {
                let (signal, first_visit) = m.observe(obs, next_obs)?;
                IntrinsicSample {
                    reward: m.rnd().config().scale * signal,
                    signal,
                    first_visit,
                }
            }
            IntrinsicModel::Count(c) => {
                let r = c.count_reward(next_obs);
                IntrinsicSample {
                    reward: r,
                    signal: r,
                    first_visit: true,
                }
            }
        })
    }

    /// Replay path: scaled rewards for each `next_obs`, without touching any state.
    pub fn score_batch(&self, batch: &Batch) -> Result<Vec<f64>> {
        match self {
            IntrinsicModel::None => Ok(vec![0.0; batch.len()]),
            IntrinsicModel::Rnd(m) => Ok(m
                .raw_batch(&batch.next_obs)?
                .into_iter()
                .map(|raw| m.reward_from_raw(raw))
                .collect()),
            IntrinsicModel::NovelD(m) => m.score(&batch.obs, &batch.next_obs, &batch.first_visit),
            IntrinsicModel::Count(c) => Ok(batch.next_obs.iter_rows().map(|o| c.peek_reward(o)).collect()),
        }
    }

    /// Trains the predictor on `obs` (one optimizer step). Returns the loss
    /// for trainable models.
    pub fn train(&mut self, obs: &Matrix) -> Result<Option<f64>> {
        match self {
            IntrinsicModel::Rnd(m) => m.train(obs).map(Some),
            IntrinsicModel::NovelD(m) => m.rnd_mut().train(obs).map(Some),
            IntrinsicModel::None | IntrinsicModel::Count(_) => Ok(None),
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, IntrinsicModel::Rnd(_) | IntrinsicModel::NovelD(_))
    }
}
