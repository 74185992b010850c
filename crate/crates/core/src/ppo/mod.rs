//! Proximal policy optimization over the batched docking environment.

mod config;
mod gae;
mod train;
mod update;

pub use config::{AblationConfig, AblationId, PPOConfig};
pub use gae::compute_gae;
pub use train::{train, TrainObserver, TrainedRun, UpdateLog, EPISODE_WINDOW};
pub use update::{
    clip_grad_norm, clipped_surrogate, normalize_advantages, ppo_update, Adam, RolloutBuffer, UpdateStats,
};
