use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use resynth::imaging::{load_image, load_mask, save_mask, save_png};

use super::{create_dir, require_dir, write_file};
use crate::args::IngestArgs;
use crate::dataset::{file_name, file_stem, list_images, read_labels, DatasetLayout};
use crate::exit::{data, usage};

/// PNG files are copied byte for byte; anything else is decoded and re-encoded.
fn copy_as_png(src: &Path, dst_dir: &Path) -> Result<()> {
    let dst = dst_dir.join(format!("{}.png", file_stem(src)));
    let is_png = src
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        std::fs::copy(src, &dst)
            .with_context(|| format!("cannot copy {} to {}", src.display(), dst.display()))?;
    } else {
        let img = load_image(src).with_context(|| format!("image {}", src.display()))?;
        save_png(&img, &dst)?;
    }
    Ok(())
}

fn unique_stems(paths: &[PathBuf], what: &str) -> Result<BTreeMap<String, PathBuf>> {
    let mut by_stem = BTreeMap::new();
    for p in paths {
        if let Some(prev) = by_stem.insert(file_stem(p), p.clone()) {
            return data(format!(
                "{what} {} and {} share a file stem",
                prev.display(),
                p.display()
            ));
        }
    }
    Ok(by_stem)
}

fn ingest_normals(src: &Path, layout: &DatasetLayout) -> Result<usize> {
    require_dir(src, "--normals")?;
    let paths = list_images(src)?;
    if paths.is_empty() {
        return data(format!("{} contains no images", src.display()));
    }
    unique_stems(&paths, "normal images")?;
    let dst = layout.normal_dir();
    create_dir(&dst)?;
    paths.par_iter().try_for_each(|p| copy_as_png(p, &dst))?;
    Ok(paths.len())
}

fn ingest_test(args: &IngestArgs, images: &Path, layout: &DatasetLayout) -> Result<usize> {
    require_dir(images, "--images")?;
    let paths = list_images(images)?;
    if paths.is_empty() {
        return data(format!("{} contains no images", images.display()));
    }
    let images = unique_stems(&paths, "test images")?;
    let masks = match &args.masks {
        Some(dir) => {
            require_dir(dir, "--masks")?;
            unique_stems(&list_images(dir)?, "masks")?
        }
        None => BTreeMap::new(),
    };
    for (stem, m) in &masks {
        if !images.contains_key(stem) {
            log::warn!("mask {} has no matching image", m.display());
        }
    }
    let labels = args.labels.as_deref().map(read_labels).transpose()?;

    let mut rows = String::new();
    for (stem, img) in &images {
        if masks.contains_key(stem) {
            continue;
        }
        let label = labels
            .as_ref()
            .and_then(|l| l.get(&file_name(img)).or_else(|| l.get(&format!("{stem}.png"))));
        match label {
            Some(&label) => writeln!(rows, "{stem}.png,{}", u8::from(label))?,
            None => return data(format!("{} has neither a mask nor a label", img.display())),
        }
    }

    let (img_dir, mask_dir) = (layout.image_dir(), layout.mask_dir());
    create_dir(&img_dir)?;
    if !masks.is_empty() {
        create_dir(&mask_dir)?;
    }
    images.par_iter().try_for_each(|(stem, img)| -> Result<()> {
        copy_as_png(img, &img_dir)?;
        if let Some(m) = masks.get(stem) {
            let mask = load_mask(m).with_context(|| format!("mask {}", m.display()))?;
            save_mask(&mask, mask_dir.join(format!("{stem}.png")))?;
        }
        Ok(())
    })?;
    if !rows.is_empty() {
        write_file(&layout.labels_path(), rows)?;
    }
    Ok(images.len())
}

/// Copies raw data into the dataset layout, normalizing every file to PNG.
pub fn run(args: &IngestArgs) -> Result<()> {
    if args.normals.is_none() && args.images.is_none() {
        return usage("ingest needs --normals, --images or both");
    }
    if args.images.is_none() && (args.masks.is_some() || args.labels.is_some()) {
        return usage("--masks and --labels require --images");
    }
    let layout = DatasetLayout::new(&args.out);
    if let Some(src) = &args.normals {
        let n = ingest_normals(src, &layout)?;
        log::info!("ingested {n} normal images");
    }
    if let Some(src) = &args.images {
        let n = ingest_test(args, src, &layout)?;
        log::info!("ingested {n} test images");
    }
    Ok(())
}
