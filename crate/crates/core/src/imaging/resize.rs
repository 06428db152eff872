use super::ImageRGB;
use crate::error::{Error, Result};

/// Source coordinate table for one axis: (low index, high index, fraction).
fn axis_taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    (0..output)
        .map(|o| {
            if output == 1 || input == 1 {
                return (0, 0, 0.0);
            }
            // Corner-aligned: first and last samples coincide with the source corners.
            let s = o as f64 * (input - 1) as f64 / (output - 1) as f64;
            let lo = (s.floor() as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Bilinear resampling with corner-aligned sampling. Equal dimensions return a copy.
pub fn resize(img: &ImageRGB, out_h: usize, out_w: usize) -> Result<ImageRGB> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::ZeroDimension {
            height: out_h,
            width: out_w,
        });
    }
    if (out_h, out_w) == img.dims() {
        return Ok(img.clone());
    }
    let ys = axis_taps(img.height(), out_h);
    let xs = axis_taps(img.width(), out_w);
    let mut data = Vec::with_capacity(out_h * out_w * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = img.pixel(y0, x0);
            let p01 = img.pixel(y0, x1);
            let p10 = img.pixel(y1, x0);
            let p11 = img.pixel(y1, x1);
            for c in 0..3 {
                let top = lerp(p00[c], p01[c], fx);
                let bottom = lerp(p10[c], p11[c], fx);
                data.push(lerp(top, bottom, fy));
            }
        }
    }
    Ok(ImageRGB::from_clamped(out_h, out_w, data))
}
