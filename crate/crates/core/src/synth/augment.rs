//! The seven photometric augmentations used to turn a normal image into lesion texture.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageRGB;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentationKind {
    Sharpen,
    Solarize,
    GammaContrast,
    HueChange,
    ColorTemperature,
    AutoContrast,
    ColorShift,
}

impl AugmentationKind {
    pub const POOL: [AugmentationKind; 7] = [
        AugmentationKind::Sharpen,
        AugmentationKind::Solarize,
        AugmentationKind::GammaContrast,
        AugmentationKind::HueChange,
        AugmentationKind::ColorTemperature,
        AugmentationKind::AutoContrast,
        AugmentationKind::ColorShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentationKind::Sharpen => "sharpen",
            AugmentationKind::Solarize => "solarize",
            AugmentationKind::GammaContrast => "gamma-contrast",
            AugmentationKind::HueChange => "hue-change",
            AugmentationKind::ColorTemperature => "color-temperature",
            AugmentationKind::AutoContrast => "auto-contrast",
            AugmentationKind::ColorShift => "color-shift",
        }
    }
}

impl fmt::Display for AugmentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::POOL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown augmentation `{s}`")))
    }
}

/// A pool member together with its drawn parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Augmentation {
    /// Unsharp mask: `v + amount * (v - box3x3(v))`.
    Sharpen { amount: f64 },
    /// Inverts channel values strictly above `threshold`.
    Solarize { threshold: f64 },
    GammaContrast { gamma: f64 },
    /// Rotation of the HSV hue angle.
    HueChange { degrees: f64 },
    /// Red gain `1 + shift`, blue gain `1 - shift`.
    ColorTemperature { shift: f64 },
    /// Per-channel min/max stretch onto `[0, 1]`.
    AutoContrast,
    /// Per-channel additive offsets.
    ColorShift { offsets: [f64; 3] },
}

impl Augmentation {
    pub fn kind(&self) -> AugmentationKind {
        match self {
            Augmentation::Sharpen { .. } => AugmentationKind::Sharpen,
            Augmentation::Solarize { .. } => AugmentationKind::Solarize,
            Augmentation::GammaContrast { .. } => AugmentationKind::GammaContrast,
            Augmentation::HueChange { .. } => AugmentationKind::HueChange,
            Augmentation::ColorTemperature { .. } => AugmentationKind::ColorTemperature,
            Augmentation::AutoContrast => AugmentationKind::AutoContrast,
            Augmentation::ColorShift { .. } => AugmentationKind::ColorShift,
        }
    }
}

/// Parameter ranges the augmentations are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationRanges {
    pub sharpen_amount: [f64; 2],
    pub solarize_threshold: [f64; 2],
    pub gamma: [f64; 2],
    /// Maximum absolute hue rotation in degrees.
    pub hue_degrees: f64,
    /// Maximum absolute red/blue gain deviation from 1.
    pub temperature_shift: f64,
    /// Maximum absolute per-channel offset.
    pub color_offset: f64,
}

impl Default for AugmentationRanges {
    fn default() -> Self {
        Self {
            sharpen_amount: [0.5, 2.0],
            solarize_threshold: [0.3, 0.9],
            gamma: [0.5, 2.0],
            hue_degrees: 36.0,
            temperature_shift: 0.2,
            color_offset: 0.1,
        }
    }
}

impl AugmentationRanges {
    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2], name: &str| {
            if r[0] <= r[1] && r.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} range {r:?} is not ordered")))
            }
        };
        ordered(self.sharpen_amount, "sharpen_amount")?;
        ordered(self.solarize_threshold, "solarize_threshold")?;
        ordered(self.gamma, "gamma")?;
        if self.sharpen_amount[0] < 0.0 || self.gamma[0] <= 0.0 {
            return Err(Error::Config("sharpen amount and gamma must be positive".into()));
        }
        if self.solarize_threshold[0] < 0.0 || self.solarize_threshold[1] > 1.0 {
            return Err(Error::Config("solarize threshold must lie in [0, 1]".into()));
        }
        if self.hue_degrees < 0.0 || self.temperature_shift < 0.0 || self.color_offset < 0.0 {
            return Err(Error::Config("symmetric ranges must be non-negative".into()));
        }
        if self.temperature_shift > 1.0 {
            return Err(Error::Config("temperature shift must be at most 1".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, max: f64) -> f64 {
    uniform(rng, [-max, max])
}

/// Draws `n` distinct augmentations without replacement, in application order.
pub fn sample_augmentations<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    ranges: &AugmentationRanges,
) -> Result<Vec<Augmentation>> {
    let mut pool = AugmentationKind::POOL;
    if n > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n} augmentations from a pool of {}",
            pool.len()
        )));
    }
    let (chosen, _) = pool.partial_shuffle(rng, n);
    Ok(chosen
        .iter()
        .map(|kind| match kind {
            AugmentationKind::Sharpen => Augmentation::Sharpen {
                amount: uniform(rng, ranges.sharpen_amount),
            },
            AugmentationKind::Solarize => Augmentation::Solarize {
                threshold: uniform(rng, ranges.solarize_threshold),
            },
            AugmentationKind::GammaContrast => Augmentation::GammaContrast {
                gamma: uniform(rng, ranges.gamma),
            },
            AugmentationKind::HueChange => Augmentation::HueChange {
                degrees: symmetric(rng, ranges.hue_degrees),
            },
            AugmentationKind::ColorTemperature => Augmentation::ColorTemperature {
                shift: symmetric(rng, ranges.temperature_shift),
            },
            AugmentationKind::AutoContrast => Augmentation::AutoContrast,
            AugmentationKind::ColorShift => Augmentation::ColorShift {
                offsets: [
                    symmetric(rng, ranges.color_offset),
                    symmetric(rng, ranges.color_offset),
                    symmetric(rng, ranges.color_offset),
                ],
            },
        })
        .collect())
}

fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    [h, s, max]
}

fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn box_blur3(img: &ImageRGB) -> Vec<f64> {
    let (h, w) = img.dims();
    let src = img.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for dy in -1i64..=1 {
                let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                for dx in -1i64..=1 {
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    let i = 3 * (sy * w + sx);
                    for c in 0..3 {
                        acc[c] += src[i + c];
                    }
                }
            }
            let o = 3 * (y * w + x);
            for c in 0..3 {
                out[o + c] = acc[c] / 9.0;
            }
        }
    }
    out
}

/// Applies one parameterized augmentation; the output is clamped to `[0, 1]`.
pub fn apply_augmentation(img: &ImageRGB, aug: &Augmentation) -> ImageRGB {
    match *aug {
        Augmentation::Sharpen { amount } => {
            if amount == 0.0 {
                return img.clone();
            }
            let blur = box_blur3(img);
            let data = img
                .data()
                .iter()
                .zip(&blur)
                .map(|(&v, &b)| v + amount * (v - b))
                .collect();
            ImageRGB::from_clamped(img.height(), img.width(), data)
        }
        Augmentation::Solarize { threshold } => {
            img.map_pixels(|p| p.map(|v| if v > threshold { 1.0 - v } else { v }))
        }
        Augmentation::GammaContrast { gamma } => {
            if gamma == 1.0 {
                return img.clone();
            }
            img.map_pixels(|p| p.map(|v| v.powf(gamma)))
        }
        Augmentation::HueChange { degrees } => {
            if degrees == 0.0 {
                return img.clone();
            }
            img.map_pixels(|p| {
                let [h, s, v] = rgb_to_hsv(p);
                hsv_to_rgb([h + degrees, s, v])
            })
        }
        Augmentation::ColorTemperature { shift } => {
            img.map_pixels(|[r, g, b]| [r * (1.0 + shift), g, b * (1.0 - shift)])
        }
        Augmentation::AutoContrast => {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for p in img.data().chunks_exact(3) {
                for c in 0..3 {
                    lo[c] = lo[c].min(p[c]);
                    hi[c] = hi[c].max(p[c]);
                }
            }
            img.map_pixels(|p| {
                let mut out = p;
                for c in 0..3 {
                    if hi[c] > lo[c] {
                        out[c] = (p[c] - lo[c]) / (hi[c] - lo[c]);
                    }
                }
                out
            })
        }
        Augmentation::ColorShift { offsets } => img.map_pixels(|p| {
            [p[0] + offsets[0], p[1] + offsets[1], p[2] + offsets[2]]
        }),
    }
}
