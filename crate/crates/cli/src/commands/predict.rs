use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use resynth::imaging::{load_image, load_mask, render_overlay, save_heatmap, save_png};
use resynth::model::{Checkpoint, Stage};
use resynth::pipeline::Detector;
use resynth::{BinaryMask, ScalarField};

use super::create_dir;
use crate::args::PredictArgs;
use crate::dataset::{file_name, file_stem, is_image, list_images};
use crate::exit::{data, usage};

fn load_ckpt(path: &Path, stage: Stage, flag: &str) -> Result<Checkpoint> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("{flag} {}", path.display()))?;
    ckpt.expect_stage(stage)
        .with_context(|| format!("{flag} {}", path.display()))?;
    Ok(ckpt)
}

fn inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let found = list_images(path)?;
        if found.is_empty() {
            return data(format!("{} contains no images", path.display()));
        }
        Ok(found)
    } else if is_image(path) {
        Ok(vec![path.to_path_buf()])
    } else {
        usage(format!("--input {} is neither an image nor a directory", path.display()))
    }
}

/// Pixels with probability `>= t`.
fn threshold(pred: &ScalarField, t: f64) -> Result<BinaryMask> {
    let bits = pred.data().iter().map(|&p| u8::from(p >= t)).collect();
    Ok(BinaryMask::new(pred.height(), pred.width(), bits)?)
}

fn overlay(
    det: &Detector,
    input: &Path,
    pred: &ScalarField,
    t: f64,
    masks: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let img = det.preprocess().apply(&load_image(input)?)?;
    let (h, w) = pred.dims();
    let gt = match masks.map(|d| d.join(file_name(input))).filter(|p| p.is_file()) {
        Some(p) => load_mask(&p)?.resize_nearest(h, w)?,
        None => BinaryMask::zeros(h, w),
    };
    save_png(&render_overlay(&img, &threshold(pred, t)?, &gt)?, out)?;
    Ok(())
}

/// Writes `<out>/<stem>.png` (16-bit heatmap) per input, and `<out>/overlays/<stem>.png`
/// when a threshold is given.
pub fn run(args: &PredictArgs) -> Result<()> {
    let loc = load_ckpt(&args.loc_ckpt, Stage::Loc, "--loc-ckpt")?;
    let recon = args
        .recon_ckpt
        .as_deref()
        .map(|p| load_ckpt(p, Stage::Recon, "--recon-ckpt"))
        .transpose()?;
    let det = Detector::from_checkpoints(&loc, recon.as_ref())?;
    let files = inputs(&args.input)?;
    if let Some(t) = args.overlay_threshold {
        if !(0.0..=1.0).contains(&t) {
            return usage(format!("--overlay-threshold {t} outside [0, 1]"));
        }
        create_dir(&args.out_dir.join("overlays"))?;
    }
    create_dir(&args.out_dir)?;
    files.par_iter().try_for_each(|input| -> Result<()> {
        let img = load_image(input).with_context(|| format!("image {}", input.display()))?;
        let pred = det.predict(&img)?;
        let name = format!("{}.png", file_stem(input));
        save_heatmap(&pred, args.out_dir.join(&name))?;
        if let Some(t) = args.overlay_threshold {
            let out = args.out_dir.join("overlays").join(&name);
            overlay(&det, input, &pred, t, args.masks.as_deref(), &out)?;
        }
        Ok(())
    })?;
    log::info!("wrote {} heatmaps to {}", files.len(), args.out_dir.display());
    Ok(())
}
