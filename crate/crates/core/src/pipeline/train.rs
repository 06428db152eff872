use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detector::guidance_for;
use super::{lr_at, SourceDomain, TrainConfig};
use crate::error::{Error, Result};
use crate::imaging::ImageRGB;
use crate::model::{
    Adam, Checkpoint, FeatureMap, LocNet, NetConfig, ReconNet, ReconSource, Stage,
};
use crate::seed::derive_seed;
use crate::synth::{generate_anomaly, procedural_texture, SynthConfig};

/// Seed stream that initializes the untrained encoder of the random-features ablation.
const RANDOM_RECON_STREAM: u64 = 0x5EED_0F_2A4D;
const STAGE1_STREAM: u64 = 1;
const STAGE2_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    pub epochs: Vec<EpochRecord>,
    pub seed: u64,
    pub wall_clock_secs: f64,
    pub checkpoint: Option<PathBuf>,
}

impl StageReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// One JSON object per epoch: `{"epoch":..,"loss":..,"lr":..}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).expect("plain numbers serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Mean loss and mean gradient of a batch. Per-sample work runs in parallel; the
/// reduction is sequential in sample order, so the result is thread-count independent.
fn batch_step<I, F>(items: &[I], n_params: usize, f: F) -> Result<(Vec<f64>, Vec<f32>)>
where
    I: Sync,
    F: Fn(&I) -> Result<(f64, Vec<f32>)> + Sync,
{
    let per_sample: Vec<(f64, Vec<f32>)> = items.par_iter().map(&f).collect::<Result<_>>()?;
    let mut grad = vec![0.0f32; n_params];
    let mut losses = Vec::with_capacity(items.len());
    for (loss, g) in &per_sample {
        losses.push(*loss);
        for (a, &b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let scale = 1.0 / items.len() as f32;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((losses, grad))
}

fn check_normals(normals: &[ImageRGB], net: &NetConfig) -> Result<()> {
    if normals.is_empty() {
        return Err(Error::EmptyInput("training set of normal images"));
    }
    let s = net.input_size;
    if let Some(img) = normals.iter().find(|i| i.dims() != (s, s)) {
        return Err(Error::dims(format!("{s}x{s}"), format!("{:?}", img.dims())));
    }
    Ok(())
}

fn finish_epoch(epochs: &mut Vec<EpochRecord>, epoch: usize, losses: &[f64], lr: f64, stage: Stage) {
    let loss = losses.iter().sum::<f64>() / losses.len() as f64;
    log::info!("{stage} epoch {epoch}: loss {loss:.6} lr {lr:.3e}");
    epochs.push(EpochRecord { epoch, loss, lr });
}

/// Stage 1: fits the reconstruction autoencoder to the normal images.
pub fn train_stage1(
    normals: &[ImageRGB],
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(ReconNet<f32>, StageReport)> {
    cfg.validate()?;
    check_normals(normals, net_cfg)?;
    let start = Instant::now();
    let mut net = ReconNet::<f32>::new(*net_cfg)?;
    let mut opt = Adam::new(net.n_params(), cfg.adam);
    let base = derive_seed(cfg.seed, STAGE1_STREAM);
    let mut epochs = Vec::with_capacity(cfg.total_epochs);
    let mut order: Vec<usize> = (0..normals.len()).collect();
    for epoch in 0..cfg.total_epochs {
        let lr = lr_at(epoch, cfg)?;
        order.shuffle(&mut crate::seed::rng(derive_seed(base, epoch as u64)));
        let mut losses = Vec::with_capacity(normals.len());
        for chunk in order.chunks(cfg.batch_size) {
            let (l, grad) = batch_step(chunk, net.n_params(), |&i| {
                net.loss_and_grad(&normals[i], &normals[i])
            })?;
            losses.extend(l);
            opt.step(net.params_mut(), &grad, lr);
        }
        finish_epoch(&mut epochs, epoch, &losses, lr, Stage::Recon);
    }
    let report = StageReport {
        stage: Stage::Recon,
        epochs,
        seed: cfg.seed,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        checkpoint: None,
    };
    Ok((net, report))
}

/// Resolves the reconstruction network stage 2 should use under `cfg.ablation`.
pub fn resolve_recon(
    recon_ckpt: Option<&Checkpoint>,
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(Option<ReconNet<f32>>, ReconSource)> {
    let ab = &cfg.ablation;
    if !ab.use_recon_features {
        return Ok((None, ReconSource::None));
    }
    if ab.recon_features_random {
        let seed = derive_seed(cfg.seed, RANDOM_RECON_STREAM);
        let net = ReconNet::new(NetConfig { seed, ..*net_cfg })?;
        return Ok((Some(net), ReconSource::Random { seed }));
    }
    let ckpt = recon_ckpt.ok_or_else(|| {
        Error::InvalidArgument("stage 2 with reconstruction features needs a stage-1 checkpoint".into())
    })?;
    let net = ckpt.recon_net::<f32>()?;
    let theirs = net.config();
    if (theirs.levels, theirs.base_channels, theirs.input_size)
        != (net_cfg.levels, net_cfg.base_channels, net_cfg.input_size)
    {
        return Err(Error::Config(format!(
            "stage-1 checkpoint architecture {theirs:?} does not match {net_cfg:?}"
        )));
    }
    let source = ReconSource::Trained {
        param_hash: net.param_hash(),
    };
    Ok((Some(net), source))
}

/// Output of stage 2.
#[derive(Debug, Clone)]
pub struct LocTraining {
    pub net: LocNet<f32>,
    pub recon: Option<ReconNet<f32>>,
    pub recon_source: ReconSource,
    pub report: StageReport,
}

/// One synthetic training pair as drawn for stage 2.
pub(crate) fn draw_training_pair(
    normals: &[ImageRGB],
    synth: &SynthConfig,
    source_domain: SourceDomain,
    seed: u64,
) -> Result<crate::synth::SynthSample> {
    let mut rng = crate::seed::rng(seed);
    let target = &normals[rng.gen_range(0..normals.len())];
    let src_idx = rng.gen_range(0..normals.len());
    let texture_seed: u64 = rng.gen();
    let synth_seed: u64 = rng.gen();
    let (h, w) = target.dims();
    match source_domain {
        SourceDomain::Fundus => generate_anomaly(&normals[src_idx], target, synth, synth_seed),
        SourceDomain::Texture => {
            let texture = procedural_texture(h, w, texture_seed)?;
            generate_anomaly(&texture, target, synth, synth_seed)
        }
    }
}

/// Stage 2: trains the localization network on synthetic lesions generated on the fly,
/// with the reconstruction network frozen.
pub fn train_stage2(
    normals: &[ImageRGB],
    recon_ckpt: Option<&Checkpoint>,
    net_cfg: &NetConfig,
    synth_cfg: &SynthConfig,
    cfg: &TrainConfig,
) -> Result<LocTraining> {
    cfg.validate()?;
    check_normals(normals, net_cfg)?;
    let synth = cfg.ablation.synth_config(synth_cfg);
    synth.validate()?;
    let start = Instant::now();
    let (recon, recon_source) = resolve_recon(recon_ckpt, net_cfg, cfg)?;
    let input = cfg.ablation.loc_input();
    let mut net = LocNet::<f32>::new(*net_cfg, input)?;
    let mut opt = Adam::new(net.n_params(), cfg.adam);
    let base = derive_seed(cfg.seed, STAGE2_STREAM);
    let tau = cfg.loss.tau;
    let n = normals.len();
    let mut epochs = Vec::with_capacity(cfg.total_epochs);
    for epoch in 0..cfg.total_epochs {
        let lr = lr_at(epoch, cfg)?;
        let epoch_seed = derive_seed(base, epoch as u64);
        let seeds: Vec<u64> = (0..n as u64).map(|j| derive_seed(epoch_seed, j)).collect();
        let mut losses = Vec::with_capacity(n);
        for chunk in seeds.chunks(cfg.batch_size) {
            let (l, grad) = batch_step(chunk, net.n_params(), |&seed| {
                let sample = draw_training_pair(normals, &synth, cfg.ablation.source_domain, seed)?;
                let x = FeatureMap::from_image(&sample.image);
                let g = guidance_for(recon.as_ref(), input, &x)?;
                net.loss_and_grad(&sample.image, &g, &sample.mask, tau)
            })?;
            losses.extend(l);
            opt.step(net.params_mut(), &grad, lr);
        }
        finish_epoch(&mut epochs, epoch, &losses, lr, Stage::Loc);
    }
    let report = StageReport {
        stage: Stage::Loc,
        epochs,
        seed: cfg.seed,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        checkpoint: None,
    };
    Ok(LocTraining {
        net,
        recon,
        recon_source,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::PreprocessConfig;
    use crate::model::{recon_loss, LocInput};

    fn net_cfg() -> NetConfig {
        NetConfig {
            levels: 2,
            base_channels: 4,
            input_size: 16,
            seed: 1,
        }
    }

    fn images(n: usize) -> Vec<ImageRGB> {
        (0..n)
            .map(|k| {
                let data = (0..16 * 16 * 3)
                    .map(|i| 0.5 + 0.3 * ((i as f64) * 0.05 + k as f64).sin())
                    .collect();
                ImageRGB::from_clamped(16, 16, data)
            })
            .collect()
    }

    fn quick(total: usize) -> TrainConfig {
        TrainConfig {
            lr_init: 1e-2,
            lr_min: 1e-3,
            warmup_epochs: 1,
            total_epochs: total,
            batch_size: 2,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn stage1_reduces_the_loss_and_is_reproducible() {
        let data = images(4);
        let (net, rep) = train_stage1(&data, &net_cfg(), &quick(30)).unwrap();
        let l = rep.losses();
        assert_eq!(l.len(), 30);
        assert!(l[29] < l[0], "{} !< {}", l[29], l[0]);
        let (net2, rep2) = train_stage1(&data, &net_cfg(), &quick(30)).unwrap();
        assert_eq!(rep.epochs, rep2.epochs);
        assert_eq!(net.params(), net2.params());
        let r = net.forward(&data[0]).unwrap();
        assert!(recon_loss(&r, &data[0]).unwrap() < l[0]);
    }

    #[test]
    fn stage1_rejects_empty_and_misshapen_input() {
        assert!(train_stage1(&[], &net_cfg(), &quick(2)).is_err());
        let bad = vec![ImageRGB::filled(8, 8, [0.5; 3])];
        assert!(train_stage1(&bad, &net_cfg(), &quick(2)).is_err());
    }

    #[test]
    fn stage2_keeps_the_encoder_frozen_and_checks_the_stage_tag() {
        let data = images(3);
        let (recon, _) = train_stage1(&data, &net_cfg(), &quick(2)).unwrap();
        let ckpt = Checkpoint::from_recon(&recon, PreprocessConfig::default());
        let before = recon.encoder_hash();
        let out = train_stage2(&data, Some(&ckpt), &net_cfg(), &SynthConfig::default(), &quick(3)).unwrap();
        assert_eq!(out.report.epochs.len(), 3);
        assert_eq!(out.recon.as_ref().unwrap().encoder_hash(), before);

        let loc_ckpt = Checkpoint::from_loc(&out.net, out.recon_source.clone(), PreprocessConfig::default());
        let err = train_stage2(&data, Some(&loc_ckpt), &net_cfg(), &SynthConfig::default(), &quick(2));
        assert!(matches!(err, Err(Error::StageMismatch { .. })));
        assert!(train_stage2(&data, None, &net_cfg(), &SynthConfig::default(), &quick(2)).is_err());
    }

    #[test]
    fn plain_ablation_needs_no_checkpoint() {
        let data = images(2);
        let mut cfg = quick(2);
        cfg.ablation.use_recon_features = false;
        let out = train_stage2(&data, None, &net_cfg(), &SynthConfig::default(), &cfg).unwrap();
        assert_eq!(out.net.input(), LocInput::Plain);
        assert_eq!(out.recon_source, ReconSource::None);
        assert!(out.recon.is_none());
    }

    #[test]
    fn stage2_is_reproducible() {
        let data = images(2);
        let mut cfg = quick(2);
        cfg.ablation.recon_features_random = true;
        let a = train_stage2(&data, None, &net_cfg(), &SynthConfig::default(), &cfg).unwrap();
        let b = train_stage2(&data, None, &net_cfg(), &SynthConfig::default(), &cfg).unwrap();
        assert_eq!(a.report.epochs, b.report.epochs);
        assert_eq!(a.net.params(), b.net.params());
        assert!(matches!(a.recon_source, ReconSource::Random { .. }));
    }

    #[test]
    fn report_lines_carry_epoch_loss_and_lr() {
        let rep = StageReport {
            stage: Stage::Recon,
            epochs: vec![EpochRecord {
                epoch: 0,
                loss: 0.5,
                lr: 0.0,
            }],
            seed: 0,
            wall_clock_secs: 1.0,
            checkpoint: None,
        };
        assert_eq!(rep.to_jsonl(), "{\"epoch\":0,\"loss\":0.5,\"lr\":0.0}\n");
    }
}
