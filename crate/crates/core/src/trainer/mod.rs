//! Risk- and uncertainty-aware PPO: rollouts, advantage and cost signals,
//! the clipped objective and the joint network update.

pub mod agent;
pub mod costs;
pub mod hyper;
pub mod rollout;
pub mod surrogate;
pub mod train;

pub use agent::{Agent, Optimizers};
pub use costs::{augmented_advantage, gae_advantages, mean_std, normalize, normalize_cost, risk_cost, uncertainty_cost};
pub use hyper::CuraHyperparams;
pub use rollout::{collect_rollouts, rollout_env, EnvTrajectory, EpisodeSummary, RolloutBatch};
pub use surrogate::{
    actor_loss_and_grad, batch_log_probs, clipped_surrogate, ppo_reference_objective, ActorBatch, ActorGrads,
    Surrogate,
};
pub use train::{
    checkpoint_dir_name, critic_loss_and_grad, cura_update, latest_checkpoint, prepare_batch, train_loop,
    IterationStats, PreparedBatch, TrainSetup, Trainer, UpdateStats, TRAIN_LOG_COLUMNS, TRAIN_LOG_FILE,
};
