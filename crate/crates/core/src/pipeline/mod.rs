//! Two-stage training, prediction and the toy end-to-end experiment.
//!
//! Stage 1 fits the reconstruction autoencoder to normal images. Stage 2
//! freezes it and trains the localization network on lesions synthesized on
//! the fly, with a fresh seed for every draw. All randomness derives from the
//! configured seed and per-sample work is reduced in a fixed order, so runs are
//! reproducible regardless of the worker count.

mod config;
mod demo;
mod detector;
mod schedule;
mod toy;
mod train;

pub use config::{Ablation, ConcatMode, Config, SourceDomain, TrainConfig};
pub use demo::{evaluate, run_demo, toy_set, DemoConfig, DemoMetrics, DemoOutcome, ToySet};
pub use detector::{predict, Detector};
pub use schedule::lr_at;
pub use toy::toy_retina;
pub use train::{resolve_recon, train_stage1, train_stage2, EpochRecord, LocTraining, StageReport};
