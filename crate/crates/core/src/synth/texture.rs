use rand::Rng;

use super::perlin::{to_unit, PerlinLattice};
use crate::error::Result;
use crate::imaging::ImageRGB;

/// Procedural non-fundus texture: three octaves of gradient noise mixed between
/// two random colours. Stands in for an external texture corpus as lesion source.
pub fn procedural_texture(height: usize, width: usize, seed: u64) -> Result<ImageRGB> {
    let mut rng = crate::seed::rng(seed);
    let c0: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let c1: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let base = rng.gen_range(3..=6);
    let octaves = (0..3)
        .map(|o| PerlinLattice::new(height, width, (1usize << (base - o)).max(1), rng.gen()))
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        for x in 0..width {
            let (mut acc, mut amp, mut norm) = (0.0, 1.0, 0.0);
            for lattice in &octaves {
                acc += amp * lattice.raw(y as f64, x as f64);
                norm += amp;
                amp *= 0.5;
            }
            let t = to_unit(acc / norm);
            for c in 0..3 {
                data.push(c0[c] + t * (c1[c] - c0[c]));
            }
        }
    }
    Ok(ImageRGB::from_clamped(height, width, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_is_deterministic_and_varied() {
        let a = procedural_texture(32, 24, 5).unwrap();
        assert_eq!(a, procedural_texture(32, 24, 5).unwrap());
        let first = a.pixel(0, 0);
        assert!((0..32).any(|y| a.pixel(y, 10) != first));
    }
}
