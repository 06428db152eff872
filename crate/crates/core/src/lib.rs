//! Unsupervised lesion detection from normal images only.
//!
//! A reconstruction autoencoder is trained on normal images; its frozen
//! encoder then feeds per-level features into a U-shaped localization network
//! that learns to segment synthetic lesions pasted into normal images.
//!
//! - [`imaging`]: image containers, I/O, CLAHE/resize, overlays
//! - [`synth`]: the lesion generator
//! - [`model`]: networks, losses, gradient checks, checkpoints
//! - [`pipeline`]: two-stage training, prediction, the toy experiment
//! - [`metrics`]: AUROC, AUPR, balanced accuracy, top-k image scores

pub mod error;
pub mod imaging;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use imaging::{BinaryMask, ImageRGB, Rect, ScalarField};
pub use synth::{SynthConfig, SynthSample};
