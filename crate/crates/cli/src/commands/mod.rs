mod demo;
mod eval;
mod ingest;
mod predict;
mod synth;
mod train;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use resynth::imaging::{load_image, PreprocessConfig};
use resynth::pipeline::Config;
use resynth::ImageRGB;

use crate::args::{Command, GlobalArgs};
use crate::exit::usage;

/// The configuration a command runs with: file (or defaults) plus `--seed`.
pub fn effective_config(global: &GlobalArgs) -> Result<Config> {
    let mut cfg = match &global.config {
        Some(path) => {
            Config::load(path).with_context(|| format!("config {}", path.display()))?
        }
        None => Config::default(),
    };
    if let Some(seed) = global.seed {
        cfg.train.seed = seed;
        cfg.net.seed = seed;
    }
    Ok(cfg)
}

pub fn dispatch(command: Command, global: &GlobalArgs) -> Result<()> {
    let cfg = effective_config(global)?;
    match command {
        Command::Synth(a) => synth::run(&a, &cfg),
        Command::TrainRecon(a) => train::run_recon(&a, &cfg),
        Command::TrainLoc(a) => train::run_loc(&a, cfg),
        Command::Predict(a) => predict::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Ingest(a) => ingest::run(&a),
        Command::Demo(a) => demo::run(&a, global),
    }
}

/// Loads and preprocesses images in parallel; order follows `paths`.
pub(crate) fn load_preprocessed(paths: &[PathBuf], pre: &PreprocessConfig) -> Result<Vec<ImageRGB>> {
    paths
        .par_iter()
        .map(|p| {
            let img = load_image(p).with_context(|| format!("image {}", p.display()))?;
            pre.apply(&img).with_context(|| format!("preprocessing {}", p.display()))
        })
        .collect()
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

/// `explicit`, or `ckpt` with its extension replaced by `jsonl`.
pub(crate) fn report_path(explicit: Option<&Path>, ckpt: &Path) -> PathBuf {
    explicit.map_or_else(|| ckpt.with_extension("jsonl"), Path::to_path_buf)
}

pub(crate) fn require_dir(dir: &Path, what: &str) -> Result<()> {
    if !dir.is_dir() {
        return usage(format!("{what} {} is not a directory", dir.display()));
    }
    Ok(())
}
