//! Optimization loop, configuration, and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod optim;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, EpochLog, MAGIC};
pub use config::{TrainConfig, CONFIG_KEYS};
pub use optim::{global_norm, Adam, AdamParams};
pub use trainer::{read_log, train, StepLoss, Trainer, CHECKPOINT_FILE, DIAGNOSTIC_FILE, LOG_FILE};
