//! Offline batch generation and the JSONL manifest describing each sample.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::Augmentation;
use super::generator::{generate_anomaly, SynthConfig, SynthSample};
use crate::error::{Error, Result};
use crate::imaging::{ImageRGB, Rect};
use crate::seed::derive_seed;

/// One manifest line. Together with the generator config and the source
/// files it regenerates the sample bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub seed: u64,
    pub source: String,
    pub target: String,
    pub crop_src: Rect,
    pub crop_dst: Rect,
    pub perlin_period: usize,
    pub foreground_pixels: usize,
    pub augs: Vec<Augmentation>,
}

/// Seed of sample `index` in a batch seeded with `base_seed`.
pub fn sample_seed(base_seed: u64, index: u64) -> u64 {
    derive_seed(base_seed, index)
}

/// Picks (source, target) indices uniformly with replacement.
fn pick_pair(seed: u64, n: usize) -> (usize, usize) {
    let mut rng = crate::seed::rng(derive_seed(seed, u64::MAX));
    (rng.gen_range(0..n), rng.gen_range(0..n))
}

/// Generates `count` samples from a pool of named images (sampled with replacement).
///
/// Samples are computed in parallel but returned in index order, so the result
/// does not depend on the worker count.
pub fn generate_batch(
    pool: &[(String, ImageRGB)],
    count: usize,
    base_seed: u64,
    cfg: &SynthConfig,
) -> Result<Vec<(ManifestRecord, SynthSample)>> {
    if pool.is_empty() {
        return Err(Error::EmptyInput("synthesis source pool"));
    }
    cfg.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = sample_seed(base_seed, i as u64);
            let (si, ti) = pick_pair(seed, pool.len());
            let sample = generate_anomaly(&pool[si].1, &pool[ti].1, cfg, seed)?;
            let record = ManifestRecord {
                id: format!("{i:06}"),
                seed,
                source: pool[si].0.clone(),
                target: pool[ti].0.clone(),
                crop_src: sample.crop_src,
                crop_dst: sample.crop_dst,
                perlin_period: sample.perlin_period,
                foreground_pixels: sample.mask.count_ones(),
                augs: sample.augs.clone(),
            };
            Ok((record, sample))
        })
        .collect()
}

/// Regenerates the sample a manifest line describes.
pub fn regenerate(
    record: &ManifestRecord,
    source: &ImageRGB,
    target: &ImageRGB,
    cfg: &SynthConfig,
) -> Result<SynthSample> {
    generate_anomaly(source, target, cfg, record.seed)
}
