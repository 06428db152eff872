//! Reconstruction autoencoder, localization U-Net, their losses, gradient
//! checks, the optimizer and checkpoints.
//!
//! Networks are generic over the element type: training uses `f32`, gradient
//! checks use `f64`. Parameters of each network live in one flat vector
//! described by a [`ParamLayout`].

mod adam;
mod checkpoint;
mod config;
mod gradcheck;
mod layers;
mod loc;
mod loss;
mod recon;
mod scalar;
mod simd;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Checkpoint, CheckpointMeta, LocMeta, ReconSource, Stage, FORMAT_VERSION, MAGIC};
pub use config::{LossConfig, NetConfig, Reduction};
pub use gradcheck::{
    grad_check, grad_check_loc, grad_check_recon, GradCheckReport, DEFAULT_STEP, REL_FLOOR,
};
pub use layers::{ConvSpec, ParamLayout, ParamTensor, LEAKY_SLOPE};
pub use loc::{Guidance, LocInput, LocNet, HEAD_PRIOR};
pub use loss::{focal_loss, recon_loss, PROB_EPS};
pub use recon::ReconNet;
pub use scalar::Scalar;
pub use tensor::FeatureMap;
