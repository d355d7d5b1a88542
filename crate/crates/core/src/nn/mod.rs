//! Small dense-network toolkit with hand-written reverse mode.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod mlp;

pub use adam::{clip_grad_norm, Adam};
pub use checkpoint::{Checkpoint, CheckpointKind};
pub use gaussian::{gaussian_log_prob, gaussian_log_prob_grad, GaussianPolicy};
pub use mlp::{Mlp, MlpCache};
