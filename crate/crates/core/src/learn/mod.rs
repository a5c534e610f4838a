//! Supraspinal drive: a Gaussian MLP policy trained with PPO, and the map from its
//! outputs to oscillator drives.

pub mod action;
pub mod mlp;
pub mod ppo;
pub mod toy;
pub mod train;

pub use action::{action_to_drives, drives_to_action, ActionSpec, DriveCommand, FrequencyBound, Scenario};
pub use mlp::{Activation, Dense, Mlp, MlpCache, MlpGrads};
pub use ppo::{
    clipped_surrogate, gae, gaussian_log_prob, gaussian_mode, gaussian_sample, mlp_forward, normalize_advantages,
    ppo_update, surrogate_stats, Adam, PolicyParams, PpoConfig, RolloutBuffer, UpdateStats,
};
pub use toy::PointMassEnv;
pub use train::{collect_rollout, Checkpoint, CurvePoint, Env, EnvStep, RolloutStats, TrainConfig, Trainer};
