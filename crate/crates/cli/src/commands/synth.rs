use std::fmt::Write as _;

use anyhow::Result;
use resynth::imaging::{save_mask, save_png};
use resynth::pipeline::Config;
use resynth::synth::generate_batch;

use super::{create_dir, load_preprocessed, require_dir, write_file};
use crate::args::SynthArgs;
use crate::dataset::{file_name, list_images};
use crate::exit::data;

/// Writes `images/<id>.png`, `masks/<id>.png` and `manifest.jsonl` under the output directory.
pub fn run(args: &SynthArgs, cfg: &Config) -> Result<()> {
    require_dir(&args.src_dir, "--src-dir")?;
    let paths = list_images(&args.src_dir)?;
    if paths.is_empty() {
        return data(format!("{} contains no images", args.src_dir.display()));
    }
    let images = load_preprocessed(&paths, &cfg.preprocess)?;
    let pool: Vec<_> = paths.iter().map(|p| file_name(p)).zip(images).collect();
    let batch = generate_batch(&pool, args.count, cfg.train.seed, &cfg.synth)?;

    let (img_dir, mask_dir) = (args.out_dir.join("images"), args.out_dir.join("masks"));
    create_dir(&img_dir)?;
    create_dir(&mask_dir)?;
    let mut manifest = String::new();
    for (record, sample) in &batch {
        save_png(&sample.image, img_dir.join(format!("{}.png", record.id)))?;
        save_mask(&sample.mask, mask_dir.join(format!("{}.png", record.id)))?;
        writeln!(manifest, "{}", serde_json::to_string(record)?)?;
    }
    write_file(&args.out_dir.join("manifest.jsonl"), manifest)?;
    log::info!("wrote {} samples to {}", batch.len(), args.out_dir.display());
    Ok(())
}
