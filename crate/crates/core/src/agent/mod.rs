//! The actor-critic controller: replay memory, Ornstein-Uhlenbeck
//! exploration, target networks and the per-step training update.

mod ddpg;
mod noise;
mod replay;

pub use ddpg::{
    invert_gradient, soft_update, ActionChoice, AgentConfig, DdpgAgent, TrainDiagnostics,
};
pub use noise::{OuConfig, OuNoise};
pub use replay::{Experience, ReplayMemory};
