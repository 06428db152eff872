//! The scaled-down end-to-end experiment: toy normals, both training stages,
//! held-out evaluation on injected lesions and the no-recon-features ablation.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{train_stage1, train_stage2, Detector, LocTraining, StageReport, TrainConfig};
use crate::error::Result;
use crate::imaging::{BinaryMask, ImageRGB, PreprocessConfig, ScalarField};
use crate::metrics::{eval_image, eval_pixel, MetricsReport};
use crate::model::{Checkpoint, NetConfig, ReconNet};
use crate::seed::derive_seed;
use crate::synth::{generate_anomaly, SynthConfig};

use super::toy::toy_retina;

const TRAIN_STREAM: u64 = 0x7121;
const TEST_STREAM: u64 = 0x7E57;
const LESION_STREAM: u64 = 0x1E51;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoConfig {
    pub seed: u64,
    pub image_size: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// How many test images receive a lesion.
    pub n_anomalous: usize,
    pub top_k: usize,
    pub net: NetConfig,
    pub stage1: TrainConfig,
    pub stage2: TrainConfig,
    pub synth: SynthConfig,
    /// Also train the no-recon-features variant with the same seed.
    pub run_ablation: bool,
}

impl Default for DemoConfig {
    fn default() -> Self {
        let train = TrainConfig {
            lr_init: 2e-3,
            lr_min: 1e-3,
            warmup_epochs: 10,
            total_epochs: 200,
            batch_size: 4,
            ..Default::default()
        };
        Self {
            seed: 0,
            image_size: 128,
            n_train: 64,
            n_test: 32,
            n_anomalous: 16,
            top_k: 10,
            net: NetConfig {
                levels: 3,
                base_channels: 8,
                input_size: 128,
                seed: 0,
            },
            stage1: train.clone(),
            stage2: train,
            synth: SynthConfig::default(),
            run_ablation: true,
        }
    }
}

impl DemoConfig {
    /// Preprocessing recorded in the demo's checkpoints: the toy images are
    /// generated at network resolution, so only the (identity) resize applies.
    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            input_size: self.image_size,
            clahe: false,
            ..Default::default()
        }
    }
}

/// Toy normals for training plus a labelled test set.
#[derive(Debug, Clone)]
pub struct ToySet {
    pub train: Vec<ImageRGB>,
    pub test: Vec<ImageRGB>,
    pub test_masks: Vec<BinaryMask>,
}

impl ToySet {
    pub fn labels(&self) -> Vec<bool> {
        self.test_masks.iter().map(|m| m.any()).collect()
    }
}

/// Builds the toy data. Test lesions come from a seed stream never used in training.
pub fn toy_set(cfg: &DemoConfig) -> Result<ToySet> {
    let s = cfg.image_size;
    let train = (0..cfg.n_train as u64)
        .into_par_iter()
        .map(|i| toy_retina(s, derive_seed(derive_seed(cfg.seed, TRAIN_STREAM), i)))
        .collect::<Result<Vec<_>>>()?;
    let normals = (0..cfg.n_test as u64)
        .into_par_iter()
        .map(|i| toy_retina(s, derive_seed(derive_seed(cfg.seed, TEST_STREAM), i)))
        .collect::<Result<Vec<_>>>()?;
    let lesion_base = derive_seed(cfg.seed, LESION_STREAM);
    let mut test = Vec::with_capacity(cfg.n_test);
    let mut test_masks = Vec::with_capacity(cfg.n_test);
    for (i, img) in normals.iter().enumerate() {
        if i < cfg.n_anomalous {
            let seed = derive_seed(lesion_base, i as u64);
            let src = &normals[crate::seed::rng(seed).gen_range(0..normals.len())];
            let sample = generate_anomaly(src, img, &cfg.synth, seed)?;
            test.push(sample.image);
            test_masks.push(sample.mask);
        } else {
            test.push(img.clone());
            test_masks.push(BinaryMask::zeros(s, s));
        }
    }
    Ok(ToySet {
        train,
        test,
        test_masks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoMetrics {
    pub pixel: MetricsReport,
    pub image: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub data: ToySet,
    pub recon: ReconNet<f32>,
    pub stage1: StageReport,
    pub full: LocTraining,
    pub full_preds: Vec<ScalarField>,
    pub full_metrics: DemoMetrics,
    pub ablation: Option<(LocTraining, DemoMetrics)>,
    pub wall_clock_secs: f64,
}

pub fn evaluate(det: &Detector, data: &ToySet, top_k: usize) -> Result<(Vec<ScalarField>, DemoMetrics)> {
    let preds = data
        .test
        .par_iter()
        .map(|img| det.predict_preprocessed(img))
        .collect::<Result<Vec<_>>>()?;
    let metrics = DemoMetrics {
        pixel: eval_pixel(&preds, &data.test_masks)?,
        image: eval_image(&preds, &data.labels(), top_k)?,
    };
    Ok((preds, metrics))
}

/// Runs the whole toy experiment.
pub fn run_demo(cfg: &DemoConfig) -> Result<DemoOutcome> {
    let start = Instant::now();
    let data = toy_set(cfg)?;
    log::info!("toy set: {} train, {} test", data.train.len(), data.test.len());

    let (recon, stage1) = train_stage1(&data.train, &cfg.net, &cfg.stage1)?;
    let recon_ckpt = Checkpoint::from_recon(&recon, cfg.preprocess());

    let full = train_stage2(&data.train, Some(&recon_ckpt), &cfg.net, &cfg.synth, &cfg.stage2)?;
    let det = Detector::new(full.net.clone(), full.recon.clone(), cfg.preprocess())?;
    let (full_preds, full_metrics) = evaluate(&det, &data, cfg.top_k)?;

    let ablation = if cfg.run_ablation {
        let mut ab_cfg = cfg.stage2.clone();
        ab_cfg.ablation.use_recon_features = false;
        let run = train_stage2(&data.train, None, &cfg.net, &cfg.synth, &ab_cfg)?;
        let det = Detector::new(run.net.clone(), None, cfg.preprocess())?;
        let (_, m) = evaluate(&det, &data, cfg.top_k)?;
        Some((run, m))
    } else {
        None
    };

    Ok(DemoOutcome {
        data,
        recon,
        stage1,
        full,
        full_preds,
        full_metrics,
        ablation,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
