//! Broadcast ordering as a learning problem: a shared noisy-sort policy
//! ranks each node's connection list before every broadcast, trained with
//! PPO on the episode-level reward.

pub mod bandit;
pub mod checkpoint;
mod env;
mod policy;
pub mod ppo;
mod train;

pub use env::{
    apply_action, episode_reward, observe, paired_run, run_episode, EVAL_SALT, ActionMode, BlockOutcome, EpisodeOutcome, EpisodeSpec,
    NetworkEnv, Observation, PolicyOrder, RankingAction, StepRecord,
};
pub use policy::{sample_ranking, PolicyParams, Ranking, LOG_STD_MAX, LOG_STD_MIN};
pub use train::{build_trajectory, episode_spec, leave_one_out_baselines, train, CurvePoint, Environment, TrainOptions, TrainState};
