//! Losses, optimizer and the two-stage training loop.
//!
//! Stage one fits geometry and color with the compensation field bypassed,
//! so the normal loss supervises the SDF normal directly. Stage two switches
//! the compensation field on (starting from the identity rotation) and
//! optimizes all fields together.

pub mod adam;
pub mod config;
pub mod log;
pub mod loss;
pub mod trainer;

pub use adam::{cosine_lr, Adam};
pub use config::TrainConfig;
pub use log::{read_log, LogRow, MetricsLog, LOG_HEADER};
pub use loss::{color_loss, eikonal_loss, normal_loss, total_loss, LossParts, LossWeights};
pub use trainer::{
    load_model, load_state, save_state, stage_at, CheckpointMeta, RunningStats, StepReport, TrainState, Trainer,
};
