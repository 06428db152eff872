use serde::{Deserialize, Serialize};

use super::{clahe, resize, ImageRGB};
use crate::error::Result;

/// Resize + CLAHE settings applied to every image entering the networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Square side length images are resized to.
    pub input_size: usize,
    pub clahe: bool,
    pub clahe_clip_limit: f64,
    pub clahe_grid: usize,
    /// Run CLAHE on the original image instead of the resized one.
    pub clahe_before_resize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            input_size: 768,
            clahe: true,
            clahe_clip_limit: 2.0,
            clahe_grid: 8,
            clahe_before_resize: false,
        }
    }
}

impl PreprocessConfig {
    pub fn apply(&self, img: &ImageRGB) -> Result<ImageRGB> {
        let n = self.input_size;
        if !self.clahe {
            return resize(img, n, n);
        }
        if self.clahe_before_resize {
            resize(&clahe(img, self.clahe_clip_limit, self.clahe_grid)?, n, n)
        } else {
            clahe(&resize(img, n, n)?, self.clahe_clip_limit, self.clahe_grid)
        }
    }
}
