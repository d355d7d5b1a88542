//! The occluded pushing task: episode sampling, rewards, observations and
//! the stepping environment.

pub mod config;
pub mod observation;
pub mod push_env;
pub mod reward;
pub mod scenario;

pub use config::{parse_list, EpisodeConfig, KeyValues, ObstacleCount, Region, RewardConfig, Scenario};
pub use observation::{feature_dim, Observation, PROPRIO_DIM};
pub use push_env::{EnvOptions, PushEnv, StepResult, ACTION_DIM};
pub use reward::{
    check_termination, compute_reward, in_collision, keypoint_distance, mean_corner_distance, RewardBreakdown,
    RewardInput, Termination,
};
pub use scenario::{sample_episode, spawn_due, ObstacleSchedule, ScheduledObstacle, SpawnEvent};
