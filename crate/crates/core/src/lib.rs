//! Two-agent exploration for sparse-reward control: a novelty-seeking soft
//! actor-critic and an extrinsic-only companion that share a replay buffer,
//! with a switch that hands control to the companion in highly novel states.

pub mod agents;
pub mod env;
pub mod harness;
pub mod error;
pub mod intrinsic;
pub mod kea;
pub mod oracle;
pub mod replay;
pub mod tensor;

pub use error::{Error, Result};
