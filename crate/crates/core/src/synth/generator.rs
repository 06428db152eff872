use rand::Rng;
use serde::{Deserialize, Serialize};

use super::augment::{apply_augmentation, sample_augmentations, Augmentation, AugmentationRanges};
use super::{distance_transform, fusion_weights, generate_perlin, self_mix_paste};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ImageRGB, Rect, ScalarField};

/// Settings of the lesion generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Lower bound of the fusion weights.
    pub alpha: f64,
    /// Inclusive range of Perlin lattice periods; periods are the powers of two inside it.
    pub perlin_res_range: [usize; 2],
    pub perlin_threshold: f64,
    /// Inclusive range of crop side length as a fraction of the image side (per axis).
    pub crop_frac_range: [f64; 2],
    /// Inclusive range of admissible mask foreground fractions.
    pub fg_frac_range: [f64; 2],
    pub n_augs: usize,
    pub max_resample: usize,
    /// Blend with distance-based weights; off means a hard paste (weights of one).
    pub use_self_mix: bool,
    /// Shape lesions with thresholded noise; off means the whole crop rectangle.
    pub use_perlin_mask: bool,
    pub augmentations: AugmentationRanges,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            perlin_res_range: [2, 16],
            perlin_threshold: 0.6,
            crop_frac_range: [0.06, 0.4],
            fg_frac_range: [0.05, 0.8],
            n_augs: 3,
            max_resample: 32,
            use_self_mix: true,
            use_perlin_mask: true,
            augmentations: AugmentationRanges::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if self.perlin_periods().is_empty() {
            return Err(Error::Config(format!(
                "perlin_res_range {:?} contains no power-of-two period",
                self.perlin_res_range
            )));
        }
        let [c0, c1] = self.crop_frac_range;
        if !(c0 > 0.0 && c0 <= c1 && c1 <= 1.0) {
            return Err(Error::Config(format!(
                "crop_frac_range {:?} must lie in (0, 1]",
                self.crop_frac_range
            )));
        }
        let [f0, f1] = self.fg_frac_range;
        if !(0.0 <= f0 && f0 <= f1 && f1 <= 1.0) {
            return Err(Error::Config(format!(
                "fg_frac_range {:?} must be an ordered range in [0, 1]",
                self.fg_frac_range
            )));
        }
        if self.n_augs > 7 {
            return Err(Error::Config(format!("n_augs {} exceeds the pool of 7", self.n_augs)));
        }
        if self.max_resample == 0 {
            return Err(Error::Config("max_resample must be at least 1".into()));
        }
        if !self.perlin_threshold.is_finite() {
            return Err(Error::Config("perlin_threshold must be finite".into()));
        }
        self.augmentations.validate()
    }

    pub fn perlin_periods(&self) -> Vec<usize> {
        let [lo, hi] = self.perlin_res_range;
        (0..usize::BITS)
            .map(|b| 1usize << b)
            .take_while(|&p| p <= hi)
            .filter(|&p| p >= lo.max(1))
            .collect()
    }

    fn admissible(&self, mask: &BinaryMask) -> bool {
        let frac = mask.foreground_fraction();
        mask.any() && frac >= self.fg_frac_range[0] && frac <= self.fg_frac_range[1]
    }
}

/// One generated training pair plus everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub image: ImageRGB,
    pub mask: BinaryMask,
    pub seed: u64,
    pub crop_src: Rect,
    pub crop_dst: Rect,
    pub augs: Vec<Augmentation>,
    /// Lattice period of the accepted Perlin mask (0 when the mask is rectangular).
    pub perlin_period: usize,
    /// Number of Perlin draws made before a mask was accepted.
    pub mask_draws: usize,
}

/// Binary mask `field >= t`.
pub fn threshold_mask(field: &ScalarField, t: f64) -> BinaryMask {
    let data = field.data().iter().map(|&v| (v >= t) as u8).collect();
    BinaryMask::new(field.height(), field.width(), data).expect("field dims are valid")
}

fn crop_side<R: Rng + ?Sized>(rng: &mut R, side: usize, [lo, hi]: [f64; 2]) -> usize {
    let frac = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    ((frac * side as f64).round() as usize).max(1)
}

/// Generates one synthetic lesion: augment the source, cut a crop, shape it with a
/// thresholded Perlin mask and blend it into the target at a random position.
///
/// Pixels outside `crop_dst` are copied from `target` unchanged.
pub fn generate_anomaly(
    source: &ImageRGB,
    target: &ImageRGB,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<SynthSample> {
    cfg.validate()?;
    if source.dims() != target.dims() {
        return Err(Error::dims(
            format!("{:?}", target.dims()),
            format!("source {:?}", source.dims()),
        ));
    }
    let (h, w) = target.dims();
    let mut rng = crate::seed::rng(seed);

    let augs = sample_augmentations(&mut rng, cfg.n_augs, &cfg.augmentations)?;
    let augmented = augs
        .iter()
        .fold(source.clone(), |img, aug| apply_augmentation(&img, aug));

    let ch = crop_side(&mut rng, h, cfg.crop_frac_range);
    let cw = crop_side(&mut rng, w, cfg.crop_frac_range);
    if ch > h || cw > w {
        return Err(Error::CropTooLarge {
            crop_h: ch,
            crop_w: cw,
            height: h,
            width: w,
        });
    }
    let crop_src = Rect::new(rng.gen_range(0..=h - ch), rng.gen_range(0..=w - cw), ch, cw);
    let c_s = augmented.crop(crop_src)?;

    let (mask, perlin_period, mask_draws) = if cfg.use_perlin_mask {
        let periods = cfg.perlin_periods();
        let mut accepted = None;
        for draw in 1..=cfg.max_resample {
            let period = periods[rng.gen_range(0..periods.len())];
            let field = generate_perlin(ch, cw, period, rng.gen())?;
            let mask = threshold_mask(&field, cfg.perlin_threshold);
            if cfg.admissible(&mask) {
                accepted = Some((mask, period, draw));
                break;
            }
        }
        accepted.ok_or(Error::RetryExhausted(cfg.max_resample))?
    } else {
        (BinaryMask::ones(ch, cw), 0, 0)
    };

    let weights = if cfg.use_self_mix {
        fusion_weights(&distance_transform(&mask), cfg.alpha)?
    } else {
        ScalarField::filled(ch, cw, 1.0)
    };

    let crop_dst = Rect::new(rng.gen_range(0..=h - ch), rng.gen_range(0..=w - cw), ch, cw);
    let c_t = target.crop(crop_dst)?;
    let (blended, crop_mask) = self_mix_paste(&c_s, &c_t, &mask, &weights)?;

    let mut image = target.clone();
    image.paste(&blended, crop_dst.y, crop_dst.x)?;
    let mut full_mask = BinaryMask::zeros(h, w);
    full_mask.paste(&crop_mask, crop_dst.y, crop_dst.x)?;

    Ok(SynthSample {
        image,
        mask: full_mask,
        seed,
        crop_src,
        crop_dst,
        augs,
        perlin_period,
        mask_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(seed: u64) -> ImageRGB {
        let mut s = seed | 1;
        let data = (0..48 * 40 * 3)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s % 1000) as f64 / 999.0
            })
            .collect();
        ImageRGB::from_clamped(48, 40, data)
    }

    #[test]
    fn threshold_conventions() {
        let f = ScalarField::new(2, 2, vec![0.2, 0.8, 0.5, 0.5]).unwrap();
        assert_eq!(threshold_mask(&f, 0.5).data(), &[0, 1, 1, 1]);
        assert!(!threshold_mask(&f, 0.81).any());
        assert_eq!(threshold_mask(&f, 0.2).count_ones(), 4);
    }

    #[test]
    fn periods_are_powers_of_two_in_range() {
        assert_eq!(SynthConfig::default().perlin_periods(), vec![2, 4, 8, 16]);
        let cfg = SynthConfig {
            perlin_res_range: [3, 3],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn outside_destination_equals_target_and_mask_is_inside() {
        let (src, tgt) = (textured(1), textured(2));
        let cfg = SynthConfig::default();
        for seed in 0..20 {
            let s = generate_anomaly(&src, &tgt, &cfg, seed).unwrap();
            assert_eq!(s.image.dims(), s.mask.dims());
            for y in 0..48 {
                for x in 0..40 {
                    if !s.crop_dst.contains(y, x) {
                        assert_eq!(s.image.pixel(y, x), tgt.pixel(y, x));
                        assert!(!s.mask.get(y, x));
                    }
                }
            }
            let crop_area = (s.crop_dst.height * s.crop_dst.width) as f64;
            let frac = s.mask.count_ones() as f64 / crop_area;
            assert!((0.05..=0.8).contains(&frac), "{frac}");
        }
    }

    #[test]
    fn deterministic_for_fixed_arguments() {
        let (src, tgt) = (textured(3), textured(4));
        let cfg = SynthConfig::default();
        assert_eq!(
            generate_anomaly(&src, &tgt, &cfg, 77).unwrap(),
            generate_anomaly(&src, &tgt, &cfg, 77).unwrap()
        );
    }

    #[test]
    fn unreachable_foreground_range_exhausts_retries() {
        let cfg = SynthConfig {
            fg_frac_range: [0.0, 0.0],
            max_resample: 5,
            ..Default::default()
        };
        let img = textured(5);
        assert!(matches!(
            generate_anomaly(&img, &img, &cfg, 1),
            Err(Error::RetryExhausted(5))
        ));
    }

    #[test]
    fn rectangular_mask_ablation_fills_the_crop() {
        let cfg = SynthConfig {
            use_perlin_mask: false,
            use_self_mix: false,
            ..Default::default()
        };
        let (src, tgt) = (textured(6), textured(7));
        let s = generate_anomaly(&src, &tgt, &cfg, 9).unwrap();
        assert_eq!(s.mask.count_ones(), s.crop_dst.height * s.crop_dst.width);
        assert_eq!(s.perlin_period, 0);
    }

    #[test]
    fn mismatched_images_are_rejected() {
        let a = textured(1);
        let b = ImageRGB::filled(10, 10, [0.5; 3]);
        assert!(generate_anomaly(&a, &b, &SynthConfig::default(), 0).is_err());
    }
}
