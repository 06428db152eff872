use anyhow::{Context, Result};
use rayon::prelude::*;
use resynth::imaging::load_heatmap;
use resynth::metrics::{eval_image, eval_pixel};
use resynth::ScalarField;

use super::{require_dir, write_file};
use crate::args::{EvalArgs, EvalMode};
use crate::dataset::{file_stem, DatasetLayout, TestItem};
use crate::exit::{data, usage};

fn heatmaps(args: &EvalArgs, items: &[TestItem]) -> Result<Vec<ScalarField>> {
    items
        .par_iter()
        .map(|item| {
            let path = args.pred_dir.join(format!("{}.png", file_stem(&item.image)));
            if !path.is_file() {
                return data(format!("no heatmap {} for {}", path.display(), item.name()));
            }
            load_heatmap(&path).with_context(|| format!("heatmap {}", path.display()))
        })
        .collect()
}

/// Prints the metrics table and writes the report JSON (`--json`, or
/// `<pred-dir>/metrics_<mode>.json`).
pub fn run(args: &EvalArgs) -> Result<()> {
    require_dir(&args.data, "--data")?;
    require_dir(&args.pred_dir, "--pred-dir")?;
    if args.k == 0 {
        return usage("--k must be at least 1");
    }
    let items = DatasetLayout::new(&args.data).test_items()?;
    let preds = heatmaps(args, &items)?;
    let (report, title) = match args.mode {
        EvalMode::Pixel => {
            let gts = items
                .par_iter()
                .zip(&preds)
                .map(|(item, pred)| {
                    let Some(mask) = item.load_mask()? else {
                        return data(format!("pixel mode needs a mask for {}", item.name()));
                    };
                    // Heatmaps live at network resolution; masks follow them.
                    let (h, w) = pred.dims();
                    Ok(mask.resize_nearest(h, w)?)
                })
                .collect::<Result<Vec<_>>>()?;
            (eval_pixel(&preds, &gts)?, "pixel-level".to_string())
        }
        EvalMode::Image => {
            let labels: Vec<bool> = items.iter().map(|i| i.label).collect();
            (eval_image(&preds, &labels, args.k)?, format!("image-level (top-{})", args.k))
        }
    };
    print!("{}", report.table(&title));
    let json = serde_json::to_string_pretty(&report)?;
    let path = args.json.clone().unwrap_or_else(|| {
        let mode = match args.mode {
            EvalMode::Pixel => "pixel",
            EvalMode::Image => "image",
        };
        args.pred_dir.join(format!("metrics_{mode}.json"))
    });
    write_file(&path, json + "\n")?;
    log::info!("report written to {}", path.display());
    Ok(())
}
