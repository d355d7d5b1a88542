//! Occlusion-aware pushing: a planar simulator with a LiDAR confidence map,
//! a distributional collision estimator, and a risk- and uncertainty-aware
//! PPO trainer.

pub mod dce;
pub mod env;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod nn;
pub mod perception;
pub mod seeding;
pub mod trainer;

pub use dce::{Dce, QuantileSet, RiskUncertainty};
pub use env::{EnvOptions, EpisodeConfig, KeyValues, PushEnv, RewardConfig, Scenario};
pub use error::{CuraError, Result};
pub use geometry::{Action, OrientedRect, Pose2D, Vec2, WorldState};
pub use nn::{Adam, Checkpoint, GaussianPolicy, Mlp};
pub use perception::{ConfidenceMap, MapEncoder, OcclusionMode};
pub use trainer::{CuraHyperparams, TrainSetup, Trainer};
pub use experiment::{EncoderSource, EvalReport, EvalSettings, RunConfig, Variant, VariantSpec};
