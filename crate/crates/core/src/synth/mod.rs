//! Appearance-consistent lesion synthesis.
//!
//! A normal source image is photometrically augmented, a random crop is cut
//! from it, shaped by a thresholded Perlin mask and blended into a normal
//! target image with weights that rise from `alpha` at the lesion rim to one
//! at its core.

mod augment;
mod batch;
mod blend;
mod edt;
mod generator;
mod perlin;
mod texture;

pub use augment::{
    apply_augmentation, sample_augmentations, Augmentation, AugmentationKind, AugmentationRanges,
};
pub use batch::{generate_batch, regenerate, sample_seed, ManifestRecord};
pub use blend::{fusion_weights, self_mix_paste};
pub use edt::distance_transform;
pub use generator::{generate_anomaly, threshold_mask, SynthConfig, SynthSample};
pub use perlin::{fade, generate_perlin, to_unit, PerlinLattice};
pub use texture::procedural_texture;
