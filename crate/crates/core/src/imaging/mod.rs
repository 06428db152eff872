//! Image containers, file I/O, preprocessing and overlay rendering.

mod clahe;
mod io;
mod overlay;
mod preprocess;
mod resize;
mod types;

pub use clahe::clahe;
pub use io::{load_heatmap, load_image, load_mask, quantize16, save_heatmap, save_mask, save_png};
pub use overlay::{render_overlay, FALSE_NEGATIVE, FALSE_POSITIVE, TINT_ALPHA, TRUE_POSITIVE};
pub use preprocess::PreprocessConfig;
pub use resize::resize;
pub use types::{BinaryMask, ImageRGB, Rect, ScalarField};
