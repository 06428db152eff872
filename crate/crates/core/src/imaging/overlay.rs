use super::{BinaryMask, ImageRGB};
use crate::error::{Error, Result};

/// Blend strength of the tint over the base image.
pub const TINT_ALPHA: f64 = 0.5;

pub const TRUE_POSITIVE: [f64; 3] = [0.0, 1.0, 0.0];
pub const FALSE_POSITIVE: [f64; 3] = [1.0, 1.0, 0.0];
pub const FALSE_NEGATIVE: [f64; 3] = [1.0, 0.0, 0.0];

/// Tints true positives green, false positives yellow and misses red.
pub fn render_overlay(img: &ImageRGB, pred: &BinaryMask, gt: &BinaryMask) -> Result<ImageRGB> {
    if pred.dims() != img.dims() {
        return Err(Error::dims(format!("{:?}", img.dims()), format!("{:?}", pred.dims())));
    }
    if gt.dims() != img.dims() {
        return Err(Error::dims(format!("{:?}", img.dims()), format!("{:?}", gt.dims())));
    }
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let tint = match (pred.get(y, x), gt.get(y, x)) {
                (true, true) => TRUE_POSITIVE,
                (true, false) => FALSE_POSITIVE,
                (false, true) => FALSE_NEGATIVE,
                (false, false) => continue,
            };
            let base = img.pixel(y, x);
            let mut px = [0.0; 3];
            for c in 0..3 {
                px[c] = (1.0 - TINT_ALPHA) * base[c] + TINT_ALPHA * tint[c];
            }
            out.set_pixel(y, x, px);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ImageRGB {
        ImageRGB::from_clamped(2, 2, (0..12).map(|i| i as f64 / 11.0).collect())
    }

    fn tinted(img: &ImageRGB, tint: [f64; 3]) -> bool {
        (0..2).all(|y| {
            (0..2).all(|x| {
                let (b, o) = (img.pixel(y, x), base().pixel(y, x));
                (0..3).all(|c| (b[c] - (0.5 * o[c] + 0.5 * tint[c])).abs() < 1e-12)
            })
        })
    }

    #[test]
    fn empty_prediction_and_truth_leave_image_untouched() {
        let e = BinaryMask::zeros(2, 2);
        assert_eq!(render_overlay(&base(), &e, &e).unwrap(), base());
    }

    #[test]
    fn all_true_positive_is_green() {
        let f = BinaryMask::ones(2, 2);
        assert!(tinted(&render_overlay(&base(), &f, &f).unwrap(), TRUE_POSITIVE));
    }

    #[test]
    fn all_false_positive_is_yellow() {
        let out = render_overlay(&base(), &BinaryMask::ones(2, 2), &BinaryMask::zeros(2, 2)).unwrap();
        assert!(tinted(&out, FALSE_POSITIVE));
    }

    #[test]
    fn misses_are_red_and_mismatched_dims_fail() {
        let out = render_overlay(&base(), &BinaryMask::zeros(2, 2), &BinaryMask::ones(2, 2)).unwrap();
        assert!(tinted(&out, FALSE_NEGATIVE));
        assert!(render_overlay(&base(), &BinaryMask::zeros(3, 2), &BinaryMask::zeros(2, 2)).is_err());
    }
}
