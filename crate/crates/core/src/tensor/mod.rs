//! Numerical substrate: dense networks, Adam, softmax policies, running statistics.

mod adam;
mod categorical;
mod matrix;
mod mlp;
mod stats;

pub use adam::{clip_grad_norm, AdamState};
pub use categorical::{argmax, log_sum_exp, Categorical};
pub use matrix::Matrix;
pub use mlp::{Activation, Dense, Mlp, Tape};
pub use stats::{RunningStats, STD_FLOOR};
