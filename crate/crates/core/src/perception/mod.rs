//! Occluded LiDAR, the decaying confidence map and the frozen map encoder.

pub mod confidence;
pub mod encoder;
pub mod lidar;

pub use confidence::{CellLabel, ConfidenceMap, LocalWindow, WINDOW_SIZE};
pub use encoder::{pool_window, pretrain_encoder, MapEncoder, PretrainReport, Vae, VaeConfig};
pub use lidar::{simulate_lidar, LidarScan, OcclusionMode};
