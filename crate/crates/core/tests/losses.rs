mod oracles;

use proptest::prelude::*;
use resynth::model::{focal_loss, recon_loss, LossConfig};
use resynth::{BinaryMask, ImageRGB, ScalarField};

fn focal(p: &[f64], m: &[bool], tau: f64) -> f64 {
    let pred = ScalarField::new(1, p.len(), p.to_vec()).unwrap();
    let mask = BinaryMask::new(1, m.len(), m.iter().map(|&b| u8::from(b)).collect()).unwrap();
    focal_loss(&pred, &mask, &LossConfig { tau, ..Default::default() }).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn focal_worked_examples() {
    assert!(rel(focal(&[0.5], &[true], 2.0), 0.25 * 2f64.ln()) < 1e-12);
    assert_eq!(format!("{:.5}", focal(&[0.5], &[true], 2.0)), "0.17329");
    assert!(rel(focal(&[0.9], &[false], 2.0), 0.81 * 10f64.ln()) < 1e-12);
    assert_eq!(format!("{:.5}", focal(&[0.9], &[false], 2.0)), "1.86509");
    let near_perfect = focal(&[1.0 - 1e-9, 1e-9], &[true, false], 2.0);
    assert!(near_perfect < 1e-12, "{near_perfect}");
}

proptest! {
    #[test]
    fn tau_zero_is_binary_cross_entropy(pm in prop::collection::vec((0.0..=1.0f64, any::<bool>()), 1..64)) {
        let (p, m): (Vec<f64>, Vec<bool>) = pm.into_iter().unzip();
        prop_assert!((focal(&p, &m, 0.0) - oracles::bce(&p, &m)).abs() < 1e-10);
    }

    #[test]
    fn focal_matches_its_pixelwise_definition(
        pm in prop::collection::vec((0.0..=1.0f64, any::<bool>()), 1..64),
        tau in 0.0..5.0f64,
    ) {
        let (p, m): (Vec<f64>, Vec<bool>) = pm.into_iter().unzip();
        let want = oracles::focal_direct(&p, &m, tau);
        prop_assert!((focal(&p, &m, tau) - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn recon_loss_is_symmetric(
        a in prop::collection::vec(0.0..=1.0f64, 48),
        b in prop::collection::vec(0.0..=1.0f64, 48),
    ) {
        let (a, b) = (ImageRGB::new(4, 4, a).unwrap(), ImageRGB::new(4, 4, b).unwrap());
        prop_assert_eq!(recon_loss(&a, &b).unwrap(), recon_loss(&b, &a).unwrap());
    }
}

#[test]
fn recon_loss_arithmetic() {
    let zeros = ImageRGB::filled(3, 3, [0.0; 3]);
    let ones = ImageRGB::filled(3, 3, [1.0; 3]);
    assert_eq!(recon_loss(&ones, &zeros).unwrap(), 1.0);
    let shifted = ImageRGB::filled(3, 3, [0.6; 3]);
    let base = ImageRGB::filled(3, 3, [0.5; 3]);
    assert!((recon_loss(&shifted, &base).unwrap() - 0.01).abs() < 1e-15);
}
