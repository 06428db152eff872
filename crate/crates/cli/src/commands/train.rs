use std::path::Path;

use anyhow::{Context, Result};
use resynth::model::{Checkpoint, Stage};
use resynth::pipeline::{train_stage1, train_stage2, Ablation, ConcatMode, Config, SourceDomain, StageReport};

use super::{load_preprocessed, report_path, require_dir};
use crate::args::{AblationFlag, TrainLocArgs, TrainReconArgs};
use crate::dataset::DatasetLayout;
use crate::exit::usage;

fn apply_ablation(ab: &mut Ablation, flags: &[AblationFlag]) {
    for flag in flags {
        match flag {
            AblationFlag::NoReconFeatures => ab.use_recon_features = false,
            AblationFlag::RandomReconFeatures => ab.recon_features_random = true,
            AblationFlag::ImageConcat => ab.concat_mode = ConcatMode::Image,
            AblationFlag::TextureSource => ab.source_domain = SourceDomain::Texture,
            AblationFlag::NoSelfMix => ab.use_self_mix = false,
            AblationFlag::NoPerlinMask => ab.use_perlin_mask = false,
        }
    }
}

fn finish(ckpt: &Checkpoint, mut report: StageReport, out: &Path, report_to: Option<&Path>) -> Result<()> {
    ckpt.save(out)?;
    report.checkpoint = Some(out.to_path_buf());
    let path = report_path(report_to, out);
    report.write_jsonl(&path)?;
    log::info!(
        "{} stage done in {:.1}s: checkpoint {}, report {}",
        report.stage,
        report.wall_clock_secs,
        out.display(),
        path.display()
    );
    Ok(())
}

fn load_normals(data: &Path, cfg: &Config) -> Result<Vec<resynth::ImageRGB>> {
    require_dir(data, "--data")?;
    let paths = DatasetLayout::new(data).normals()?;
    log::info!("loading {} normal images", paths.len());
    load_preprocessed(&paths, &cfg.preprocess)
}

pub fn run_recon(args: &TrainReconArgs, cfg: &Config) -> Result<()> {
    let normals = load_normals(&args.data, cfg)?;
    let (net, report) = train_stage1(&normals, &cfg.net, &cfg.train)?;
    let ckpt = Checkpoint::from_recon(&net, cfg.preprocess.clone());
    finish(&ckpt, report, &args.out, args.report.as_deref())
}

pub fn run_loc(args: &TrainLocArgs, mut cfg: Config) -> Result<()> {
    apply_ablation(&mut cfg.train.ablation, &args.ablation);
    let recon_ckpt = match &args.recon_ckpt {
        Some(path) => {
            let ckpt = Checkpoint::load(path).with_context(|| format!("checkpoint {}", path.display()))?;
            ckpt.expect_stage(Stage::Recon)
                .with_context(|| format!("--recon-ckpt {}", path.display()))?;
            if ckpt.meta.preprocess != cfg.preprocess {
                log::warn!("stage-1 checkpoint was trained with different preprocessing");
            }
            Some(ckpt)
        }
        None if cfg.train.ablation.needs_trained_recon() => {
            return usage("train-loc needs --recon-ckpt unless --ablation no-recon-features or random-recon-features is set");
        }
        None => None,
    };
    if recon_ckpt.is_some() && !cfg.train.ablation.needs_trained_recon() {
        log::warn!("--recon-ckpt is ignored under the selected ablation");
    }
    let normals = load_normals(&args.data, &cfg)?;
    let run = train_stage2(&normals, recon_ckpt.as_ref(), &cfg.net, &cfg.synth, &cfg.train)?;
    let ckpt = Checkpoint::from_loc(&run.net, run.recon_source, cfg.preprocess.clone());
    finish(&ckpt, run.report, &args.out, args.report.as_deref())
}
