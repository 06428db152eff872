use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ImageRGB, ScalarField};

/// Rescales a distance map onto `[alpha, 1]`: `(1 - alpha) * norm(D) + alpha`.
///
/// A constant map has no spread to normalize and yields `alpha` everywhere.
pub fn fusion_weights(distances: &ScalarField, alpha: f64) -> Result<ScalarField> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
    }
    let (lo, hi) = (distances.min(), distances.max());
    if hi <= lo {
        return Ok(ScalarField::filled(distances.height(), distances.width(), alpha));
    }
    distances.map(|d| {
        let t = (d - lo) / (hi - lo);
        // Same as (1 - alpha) * t + alpha, written so both endpoints are exact.
        ((1.0 - t) * alpha + t).clamp(alpha, 1.0)
    })
}

/// Blends a source crop into a target crop under the smoothing mask `mask * weights`.
///
/// Returns the blended crop and the hard lesion label (the mask itself).
pub fn self_mix_paste(
    source: &ImageRGB,
    target: &ImageRGB,
    mask: &BinaryMask,
    weights: &ScalarField,
) -> Result<(ImageRGB, BinaryMask)> {
    let dims = target.dims();
    for (name, d) in [
        ("source", source.dims()),
        ("mask", mask.dims()),
        ("weights", weights.dims()),
    ] {
        if d != dims {
            return Err(Error::dims(format!("{dims:?}"), format!("{name} {d:?}")));
        }
    }
    let (src, tgt) = (source.data(), target.data());
    let mut data = Vec::with_capacity(tgt.len());
    for (i, (&m, &w)) in mask.data().iter().zip(weights.data()).enumerate() {
        let a = m as f64 * w;
        for c in 0..3 {
            let (s, t) = (src[3 * i + c], tgt[3 * i + c]);
            data.push(if a == 0.0 {
                t
            } else if a == 1.0 {
                s
            } else {
                t + a * (s - t)
            });
        }
    }
    Ok((ImageRGB::from_clamped(dims.0, dims.1, data), mask.clone()))
}
