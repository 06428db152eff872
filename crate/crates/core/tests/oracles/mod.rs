//! Slow, obviously-correct reference implementations used as test oracles.

#![allow(dead_code)]

use resynth::{BinaryMask, ImageRGB, ScalarField};

/// Nearest-background distance by exhaustive scan. A mask with no background
/// is measured against the ring of pixels just outside the image.
pub fn edt_brute(mask: &BinaryMask) -> Vec<f64> {
    let (h, w) = mask.dims();
    let (h, w) = (h as i64, w as i64);
    let mut background: Vec<(i64, i64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(y as usize, x as usize) {
                background.push((y, x));
            }
        }
    }
    if background.is_empty() {
        for y in -1..=h {
            for x in -1..=w {
                if y < 0 || x < 0 || y == h || x == w {
                    background.push((y, x));
                }
            }
        }
    }
    let mut out = Vec::with_capacity((h * w) as usize);
    for y in 0..h {
        for x in 0..w {
            let best = background
                .iter()
                .map(|&(by, bx)| (by - y).pow(2) + (bx - x).pow(2))
                .min()
                .unwrap();
            out.push((best as f64).sqrt());
        }
    }
    out
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counted half.
pub fn auroc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Average precision as a sum over positives of the precision at that
/// positive's score, counting every item tied with it as retrieved.
pub fn ap_rank_sum(scores: &[f64], labels: &[bool]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut total = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        let retrieved = scores.iter().filter(|&&o| o >= s).count() as f64;
        let hits = scores
            .iter()
            .zip(labels)
            .filter(|&(&o, &l)| o >= s && l)
            .count() as f64;
        total += hits / retrieved;
    }
    total / n_pos
}

/// Best mean of sensitivity and specificity over every threshold `score >= t`,
/// including one above all scores.
pub fn balanced_acc_sweep(scores: &[f64], labels: &[bool]) -> f64 {
    let p = labels.iter().filter(|&&l| l).count() as f64;
    let n = labels.len() as f64 - p;
    let mut thresholds = scores.to_vec();
    thresholds.push(f64::INFINITY);
    thresholds
        .iter()
        .map(|&t| {
            let tp = scores.iter().zip(labels).filter(|&(&s, &l)| s >= t && l).count() as f64;
            let tn = scores.iter().zip(labels).filter(|&(&s, &l)| s < t && !l).count() as f64;
            (tp / p + tn / n) / 2.0
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Mean focal loss written directly from its per-pixel definition.
pub fn focal_direct(p: &[f64], m: &[bool], tau: f64) -> f64 {
    let eps = 1e-7;
    let total: f64 = p
        .iter()
        .zip(m)
        .map(|(&p, &m)| {
            let p = p.clamp(eps, 1.0 - eps);
            if m {
                -(1.0 - p).powf(tau) * p.ln()
            } else {
                -p.powf(tau) * (1.0 - p).ln()
            }
        })
        .sum();
    total / p.len() as f64
}

/// Mean binary cross-entropy.
pub fn bce(p: &[f64], m: &[bool]) -> f64 {
    let eps = 1e-7;
    let total: f64 = p
        .iter()
        .zip(m)
        .map(|(&p, &m)| {
            let p = p.clamp(eps, 1.0 - eps);
            if m {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / p.len() as f64
}

/// True when every channel of every pixel of `out` lies between `a` and `b`.
pub fn is_convex_blend(out: &ImageRGB, a: &ImageRGB, b: &ImageRGB) -> bool {
    out.data()
        .iter()
        .zip(a.data().iter().zip(b.data()))
        .all(|(&o, (&x, &y))| x.min(y) <= o && o <= x.max(y))
}

/// Min and max of `w` restricted to the foreground of `mask`.
pub fn foreground_range(w: &ScalarField, mask: &BinaryMask) -> (f64, f64) {
    w.data()
        .iter()
        .zip(mask.data())
        .filter(|&(_, &m)| m != 0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)))
}
