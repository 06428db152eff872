use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;
use resynth::imaging::{save_heatmap, save_mask, save_png};
use resynth::model::Checkpoint;
use resynth::pipeline::{run_demo, DemoConfig, DemoOutcome, TrainConfig};
use serde_json::json;

use super::{create_dir, write_file};
use crate::args::{DemoArgs, GlobalArgs};
use crate::exit::usage;

const MIN_IMAGE_AUROC: f64 = 0.90;
const MIN_PIXEL_AUPR: f64 = 0.30;

fn set_epochs(cfg: &mut TrainConfig, epochs: usize) {
    cfg.total_epochs = epochs;
    cfg.warmup_epochs = cfg.warmup_epochs.min(epochs - 1);
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn write_outputs(dir: &Path, cfg: &DemoConfig, out: &DemoOutcome) -> Result<()> {
    let pre = cfg.preprocess();
    Checkpoint::from_recon(&out.recon, pre.clone()).save(dir.join("recon.ckpt"))?;
    Checkpoint::from_loc(&out.full.net, out.full.recon_source.clone(), pre).save(dir.join("loc.ckpt"))?;
    out.stage1.write_jsonl(dir.join("recon.jsonl"))?;
    out.full.report.write_jsonl(dir.join("loc.jsonl"))?;

    let sub = ["images", "masks", "heatmaps"].map(|s| dir.join(s));
    for d in &sub {
        create_dir(d)?;
    }
    let data = &out.data;
    (0..data.test.len()).into_par_iter().try_for_each(|i| -> Result<()> {
        let name = format!("{i:03}.png");
        save_png(&data.test[i], sub[0].join(&name))?;
        save_mask(&data.test_masks[i], sub[1].join(&name))?;
        save_heatmap(&out.full_preds[i], sub[2].join(&name))?;
        Ok(())
    })?;

    let report = json!({
        "config": cfg,
        "wall_clock_secs": out.wall_clock_secs,
        "stage1_losses": out.stage1.losses(),
        "stage2_losses": out.full.report.losses(),
        "full": out.full_metrics,
        "no_recon_features": out.ablation.as_ref().map(|(_, m)| m),
    });
    write_file(&dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")
}

/// Runs the toy experiment end to end and prints metrics with pass/fail gates.
pub fn run(args: &DemoArgs, global: &GlobalArgs) -> Result<()> {
    let mut cfg = DemoConfig {
        run_ablation: !args.no_ablation,
        ..Default::default()
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
        cfg.net.seed = seed;
        cfg.stage1.seed = seed;
        cfg.stage2.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        if epochs == 0 {
            return usage("--epochs must be at least 1");
        }
        set_epochs(&mut cfg.stage1, epochs);
        set_epochs(&mut cfg.stage2, epochs);
    }
    if global.config.is_some() {
        log::warn!("demo uses its built-in configuration; --config is ignored");
    }

    let out = run_demo(&cfg)?;
    let full = &out.full_metrics;
    print!("{}", full.pixel.table("full model, pixel-level"));
    print!("{}", full.image.table(&format!("full model, image-level (top-{})", cfg.top_k)));
    if let Some((_, m)) = &out.ablation {
        print!("{}", m.pixel.table("no recon features, pixel-level"));
        print!("{}", m.image.table(&format!("no recon features, image-level (top-{})", cfg.top_k)));
    }
    println!(
        "{} image AUROC {:.4} >= {MIN_IMAGE_AUROC}",
        verdict(full.image.auroc >= MIN_IMAGE_AUROC),
        full.image.auroc
    );
    println!(
        "{} pixel AUPR {:.4} >= {MIN_PIXEL_AUPR}",
        verdict(full.pixel.aupr >= MIN_PIXEL_AUPR),
        full.pixel.aupr
    );
    if let Some((_, m)) = &out.ablation {
        println!(
            "{} pixel AUPR full {:.4} > no recon features {:.4}",
            verdict(full.pixel.aupr > m.pixel.aupr),
            full.pixel.aupr,
            m.pixel.aupr
        );
    }
    println!("wall clock {:.1}s", out.wall_clock_secs);

    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        write_outputs(dir, &cfg, &out)?;
        log::info!("demo outputs written to {}", dir.display());
    }
    Ok(())
}
