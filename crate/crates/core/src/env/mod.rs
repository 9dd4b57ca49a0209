//! Controller-facing environment: RL state, rewards, episode lifecycle and
//! set-point schedules.

mod episode;
mod reward;
mod setpoint;
mod state;

pub use episode::{
    episode_status, fit_action_regression, init_episode, ActionRegression, DoneReason,
    EpisodeConfig, EpisodeStatus, Initializer,
};
pub use reward::{compute_reward, RewardKind};
pub use setpoint::SetpointScheduler;
pub use state::{build_rl_state, state_dim, History};
