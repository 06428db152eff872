//! Contrast-limited adaptive histogram equalization on the luma channel.
//!
//! The image is split into YCbCr (BT.601, full range); only Y is equalized.
//! Each tile builds a 256-bin histogram, clips it at
//! `clip_limit * tile_area / 256`, spreads the clipped excess evenly over all
//! bins and turns the result into a lookup table. Pixels blend the tables of
//! the four nearest tile centres bilinearly.
//!
//! The table maps a bin to the midpoint of its cumulative mass,
//! `(cdf(b - 1) + cdf(b)) / 2`, so flat regions come back at (almost) their
//! input level instead of being pushed up by half a bin's population.

use super::ImageRGB;
use crate::error::{Error, Result};

const BINS: usize = 256;

const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

#[inline]
fn to_ycbcr([r, g, b]: [f64; 3]) -> [f64; 3] {
    let y = KR * r + KG * g + KB * b;
    [y, (b - y) / (2.0 * (1.0 - KB)), (r - y) / (2.0 * (1.0 - KR))]
}

#[inline]
fn from_ycbcr([y, cb, cr]: [f64; 3]) -> [f64; 3] {
    let r = y + 2.0 * (1.0 - KR) * cr;
    let b = y + 2.0 * (1.0 - KB) * cb;
    let g = (y - KR * r - KB * b) / KG;
    [r, g, b]
}

#[inline]
pub(crate) fn luma_bin(y: f64) -> usize {
    ((y.clamp(0.0, 1.0) * (BINS - 1) as f64).round() as usize).min(BINS - 1)
}

/// Tile boundaries along one axis.
fn tile_spans(len: usize, grid: usize) -> Vec<(usize, usize)> {
    (0..grid)
        .map(|t| (t * len / grid, (t + 1) * len / grid))
        .collect()
}

/// For every coordinate: (tile a, tile b, weight of b) for bilinear table blending.
fn blend_taps(len: usize, spans: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let centres: Vec<f64> = spans
        .iter()
        .map(|&(s, e)| (s + e) as f64 / 2.0 - 0.5)
        .collect();
    let last = centres.len() - 1;
    (0..len)
        .map(|p| {
            let p = p as f64;
            if p <= centres[0] {
                return (0, 0, 0.0);
            }
            if p >= centres[last] {
                return (last, last, 0.0);
            }
            let t = centres.iter().rposition(|&c| c <= p).unwrap();
            let w = (p - centres[t]) / (centres[t + 1] - centres[t]);
            (t, t + 1, w)
        })
        .collect()
}

fn tile_lut(bins: &[usize], clip_limit: f64) -> [f64; BINS] {
    let mut hist = [0.0f64; BINS];
    for &b in bins {
        hist[b] += 1.0;
    }
    let area = bins.len() as f64;
    let limit = (clip_limit * area / BINS as f64).max(1.0);
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let share = excess / BINS as f64;
    let mut lut = [0.0; BINS];
    let mut below = 0.0;
    for (b, h) in hist.iter().enumerate() {
        let through = below + h + share;
        lut[b] = (below + through) / (2.0 * area);
        below = through;
    }
    lut
}

/// CLAHE with `grid x grid` tiles and the given clip limit.
pub fn clahe(img: &ImageRGB, clip_limit: f64, grid: usize) -> Result<ImageRGB> {
    if grid == 0 {
        return Err(Error::InvalidArgument("CLAHE grid must be at least 1".into()));
    }
    if !(clip_limit > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "CLAHE clip limit must be positive, got {clip_limit}"
        )));
    }
    let (h, w) = img.dims();
    if h < grid || w < grid {
        return Err(Error::dims(
            format!("at least {grid}x{grid} pixels"),
            format!("{h}x{w}"),
        ));
    }

    let ycc: Vec<[f64; 3]> = img
        .data()
        .chunks_exact(3)
        .map(|p| to_ycbcr([p[0], p[1], p[2]]))
        .collect();
    let bins: Vec<usize> = ycc.iter().map(|p| luma_bin(p[0])).collect();

    let rows = tile_spans(h, grid);
    let cols = tile_spans(w, grid);
    let mut luts = Vec::with_capacity(grid * grid);
    let mut scratch = Vec::new();
    for &(y0, y1) in &rows {
        for &(x0, x1) in &cols {
            scratch.clear();
            for y in y0..y1 {
                scratch.extend_from_slice(&bins[y * w + x0..y * w + x1]);
            }
            luts.push(tile_lut(&scratch, clip_limit));
        }
    }

    let ytaps = blend_taps(h, &rows);
    let xtaps = blend_taps(w, &cols);
    let mut data = Vec::with_capacity(h * w * 3);
    for (y, &(ta, tb, wy)) in ytaps.iter().enumerate() {
        for (x, &(sa, sb, wx)) in xtaps.iter().enumerate() {
            let i = y * w + x;
            let b = bins[i];
            let top = luts[ta * grid + sa][b] * (1.0 - wx) + luts[ta * grid + sb][b] * wx;
            let bottom = luts[tb * grid + sa][b] * (1.0 - wx) + luts[tb * grid + sb][b] * wx;
            let luma = top * (1.0 - wy) + bottom * wy;
            let [_, cb, cr] = ycc[i];
            data.extend_from_slice(&from_ycbcr([luma, cb, cr]));
        }
    }
    Ok(ImageRGB::from_clamped(h, w, data))
}
