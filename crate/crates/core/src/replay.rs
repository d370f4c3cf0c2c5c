//! Shared ring-buffer replay with uniform sampling.
//!
//! Only extrinsic data is stored; intrinsic rewards are recomputed for each
//! sampled batch by the current intrinsic model.

use rand::Rng;

use crate::error::{Error, Result};
use crate::intrinsic::IntrinsicModel;
use crate::kea::PolicyId;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward_ext: f64,
    pub next_obs: Vec<f64>,
    pub terminated: bool,
    pub truncated: bool,
    /// Which agent chose `action`.
    pub behavior: PolicyId,
    /// `next_obs` was seen for the first time in its episode; needed to
    /// recompute episodic-count gated bonuses.
    pub first_visit: bool,
}

impl Transition {
    fn check(&self, obs_dim: Option<usize>) -> Result<()> {
        if self.obs.len() != self.next_obs.len() {
            return Err(Error::contract(format!(
                "obs has length {}, next_obs {}",
                self.obs.len(),
                self.next_obs.len()
            )));
        }
        if let Some(dim) = obs_dim {
            if self.obs.len() != dim {
                return Err(Error::contract(format!(
                    "observation length {} differs from buffer's {dim}",
                    self.obs.len()
                )));
            }
        }
        if !self.reward_ext.is_finite() {
            return Err(Error::contract(format!("non-finite extrinsic reward {}", self.reward_ext)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    /// Slot the next push overwrites once full.
    head: usize,
    insert_count: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::contract("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            insert_count: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn insert_count(&self) -> u64 {
        self.insert_count
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.check(self.storage.first().map(|f| f.obs.len()))?;
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.insert_count += 1;
        Ok(())
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.storage.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Uniform draws with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::BufferEmpty);
        }
        if batch_size == 0 {
            return Err(Error::contract("batch size must be positive"));
        }
        Ok((0..batch_size).map(|_| rng.random_range(0..self.storage.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        let idx = self.sample_indices(batch_size, rng)?;
        Ok(idx.into_iter().map(|i| &self.storage[i]).collect())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.storage.get(index)
    }
}

/// One row per transition of a sampled batch, as consumed by the learners.
#[derive(Clone, Debug)]
pub struct Batch {
    pub obs: Matrix,
    pub next_obs: Matrix,
    pub actions: Vec<usize>,
    pub reward_ext: Vec<f64>,
    pub terminated: Vec<bool>,
    pub first_visit: Vec<bool>,
    /// Filled by [`recompute_intrinsic`].
    pub r_int: Option<Vec<f64>>,
}

impl Batch {
    pub fn from_transitions(transitions: &[&Transition]) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        let obs: Vec<&[f64]> = transitions.iter().map(|t| t.obs.as_slice()).collect();
        let next: Vec<&[f64]> = transitions.iter().map(|t| t.next_obs.as_slice()).collect();
        Ok(Self {
            obs: Matrix::from_rows(&obs)?,
            next_obs: Matrix::from_rows(&next)?,
            actions: transitions.iter().map(|t| t.action).collect(),
            reward_ext: transitions.iter().map(|t| t.reward_ext).collect(),
            terminated: transitions.iter().map(|t| t.terminated).collect(),
            first_visit: transitions.iter().map(|t| t.first_visit).collect(),
            r_int: None,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn with_r_int(mut self, r_int: Vec<f64>) -> Result<Self> {
        if r_int.len() != self.len() {
            return Err(Error::contract(format!(
                "{} intrinsic rewards for a batch of {}",
                r_int.len(),
                self.len()
            )));
        }
        self.r_int = Some(r_int);
        Ok(self)
    }
}

/// Scores every `next_obs` of `batch` with the current intrinsic model.
/// The model and the stored transitions are left untouched.
pub fn recompute_intrinsic(batch: &Batch, model: &IntrinsicModel) -> Result<Vec<f64>> {
    model.score_batch(batch)
}
