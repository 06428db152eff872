//! On-disk dataset convention.
//!
//! ```text
//! <root>/train/normal/*.png|jpg     normal training images
//! <root>/test/images/*.png|jpg      test images
//! <root>/test/masks/<same name>     lesion masks, 0 / 255
//! <root>/test/labels.csv            filename,label for test images without a mask
//! ```
//!
//! A test image is anomalous iff its mask has a nonzero pixel; images without a
//! mask take their label from `labels.csv`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use resynth::imaging::load_mask;
use resynth::BinaryMask;

use crate::exit::data;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.with_context(|| format!("cannot list {}", dir.display()))?.path();
        if is_image(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads `filename,label` rows; a header row is skipped if its label is not a number.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, bool>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut labels = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let (Some(name), Some(label)) = (row.get(0), row.get(1)) else {
            return data(format!("{}: row {} needs filename,label", path.display(), i + 1));
        };
        match label {
            "0" => labels.insert(name.to_string(), false),
            "1" => labels.insert(name.to_string(), true),
            _ if i == 0 => continue,
            other => {
                return data(format!(
                    "{}: row {}: label must be 0 or 1, got {other:?}",
                    path.display(),
                    i + 1
                ))
            }
        };
    }
    Ok(labels)
}

/// Ground truth for one test image.
#[derive(Debug)]
pub struct TestItem {
    pub image: PathBuf,
    pub mask: Option<PathBuf>,
    pub label: bool,
}

impl TestItem {
    pub fn name(&self) -> String {
        file_name(&self.image)
    }

    pub fn load_mask(&self) -> Result<Option<BinaryMask>> {
        self.mask
            .as_deref()
            .map(|p| load_mask(p).with_context(|| format!("mask {}", p.display())))
            .transpose()
    }
}

#[derive(Debug, Clone)]
pub struct DatasetLayout {
    root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn normal_dir(&self) -> PathBuf {
        self.root.join("train").join("normal")
    }

    pub fn image_dir(&self) -> PathBuf {
        self.root.join("test").join("images")
    }

    pub fn mask_dir(&self) -> PathBuf {
        self.root.join("test").join("masks")
    }

    pub fn labels_path(&self) -> PathBuf {
        self.root.join("test").join("labels.csv")
    }

    pub fn normals(&self) -> Result<Vec<PathBuf>> {
        let found = list_images(&self.normal_dir())?;
        if found.is_empty() {
            bail!(resynth::Error::EmptyInput("train/normal contains no images"));
        }
        Ok(found)
    }

    /// Test images with their mask path (if any) and image-level label.
    pub fn test_items(&self) -> Result<Vec<TestItem>> {
        let labels_path = self.labels_path();
        let labels = if labels_path.is_file() {
            read_labels(&labels_path)?
        } else {
            BTreeMap::new()
        };
        let mut items = Vec::new();
        for image in list_images(&self.image_dir())? {
            let name = file_name(&image);
            let mask = Some(self.mask_dir().join(&name)).filter(|p| p.is_file());
            let label = match (&mask, labels.get(&name)) {
                (Some(m), _) => load_mask(m).with_context(|| format!("mask {}", m.display()))?.any(),
                (None, Some(&l)) => l,
                (None, None) => {
                    return data(format!("test image {name} has neither a mask nor a labels.csv row"))
                }
            };
            items.push(TestItem { image, mask, label });
        }
        if items.is_empty() {
            bail!(resynth::Error::EmptyInput("test/images contains no images"));
        }
        Ok(items)
    }
}
