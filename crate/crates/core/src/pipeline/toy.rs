//! Procedural retina-like images for the end-to-end toy experiment.
//!
//! Each image is an orange fundus field with a darker rim, a bright optic
//! disc, a darker macula and a tree of dark vessels leaving the disc. Layout,
//! colours and vessel paths vary with the seed.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imaging::ImageRGB;
use crate::synth::PerlinLattice;

struct Vessel {
    points: Vec<[f64; 2]>,
    widths: Vec<f64>,
}

fn grow_vessel(rng: &mut ChaCha8Rng, start: [f64; 2], angle: f64, size: f64, width: f64) -> Vessel {
    let steps = rng.gen_range(18..30);
    let step = size / 32.0;
    let mut heading = angle;
    let mut turn: f64 = rng.gen_range(-0.08..0.08);
    let mut p = start;
    let mut points = vec![p];
    let mut widths = vec![width];
    for i in 1..steps {
        turn = (turn + rng.gen_range(-0.05..0.05)).clamp(-0.12, 0.12);
        heading += turn;
        p = [p[0] + step * heading.sin(), p[1] + step * heading.cos()];
        points.push(p);
        widths.push(width * (1.0 - 0.6 * i as f64 / steps as f64));
    }
    Vessel { points, widths }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let (dy, dx) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dy * dy + dx * dx;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dy + (p[1] - a[1]) * dx) / len2).clamp(0.0, 1.0)
    };
    let (qy, qx) = (a[0] + t * dy - p[0], a[1] + t * dx - p[1]);
    ((qy * qy + qx * qx).sqrt(), t)
}

/// Vessel darkness in `[0, 1]` per pixel (maximum over segments).
fn vessel_field(vessels: &[Vessel], size: usize) -> Vec<f64> {
    let mut field = vec![0.0f64; size * size];
    for v in vessels {
        for (i, pair) in v.points.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let (w0, w1) = (v.widths[i], v.widths[i + 1]);
            let reach = 2.5 * w0.max(w1);
            let y0 = (a[0].min(b[0]) - reach).floor().max(0.0) as usize;
            let y1 = ((a[0].max(b[0]) + reach).ceil().max(0.0) as usize).min(size);
            let x0 = (a[1].min(b[1]) - reach).floor().max(0.0) as usize;
            let x1 = ((a[1].max(b[1]) + reach).ceil().max(0.0) as usize).min(size);
            for y in y0..y1 {
                for x in x0..x1 {
                    let (d, t) = segment_distance([y as f64, x as f64], a, b);
                    let w = w0 + t * (w1 - w0);
                    let v = (-(d / w).powi(2)).exp();
                    let f = &mut field[y * size + x];
                    *f = f.max(v);
                }
            }
        }
    }
    field
}

/// One `size x size` retina-like image.
pub fn toy_retina(size: usize, seed: u64) -> Result<ImageRGB> {
    let mut rng = crate::seed::rng(seed);
    let s = size as f64;
    let tint: f64 = rng.gen_range(-0.06..0.06);
    let base = [0.78 + tint, 0.38 + 0.5 * tint, 0.16];
    let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let disc = [
        s * rng.gen_range(0.42..0.58),
        s * (0.5 + side * rng.gen_range(0.2..0.28)),
    ];
    let disc_r = s * rng.gen_range(0.07..0.09);
    let macula = [disc[0] + s * rng.gen_range(-0.04..0.04), disc[1] - side * s * 0.3];
    let macula_r = s * 0.1;
    let shading = PerlinLattice::new(size, size, (size / 4).max(1), rng.gen())?;

    let n_vessels = rng.gen_range(6..10);
    let vessels: Vec<Vessel> = (0..n_vessels)
        .map(|k| {
            let angle = 2.0 * PI * (k as f64 + rng.gen_range(0.0..0.6)) / n_vessels as f64;
            let start = [disc[0] + 0.6 * disc_r * angle.sin(), disc[1] + 0.6 * disc_r * angle.cos()];
            let width = s * rng.gen_range(0.012..0.02);
            grow_vessel(&mut rng, start, angle, s, width)
        })
        .collect();
    let vessel = vessel_field(&vessels, size);

    let mut data = Vec::with_capacity(size * size * 3);
    let centre = s / 2.0;
    for y in 0..size {
        for x in 0..size {
            let (fy, fx) = (y as f64 + 0.5, x as f64 + 0.5);
            let r2 = ((fy - centre).powi(2) + (fx - centre).powi(2)) / (centre * centre);
            let mut px = base.map(|c| c * (1.0 - 0.3 * r2));
            let shade = 1.0 + 0.12 * shading.raw(y as f64, x as f64);
            px = px.map(|c| c * shade);

            let dm = ((fy - macula[0]).powi(2) + (fx - macula[1]).powi(2)).sqrt() / macula_r;
            let m = (-dm * dm).exp() * 0.35;
            px = px.map(|c| c * (1.0 - m));

            let dd = ((fy - disc[0]).powi(2) + (fx - disc[1]).powi(2)).sqrt() / disc_r;
            let d = 1.0 / (1.0 + (8.0 * (dd - 1.0)).exp());
            let disc_rgb = [0.98, 0.88, 0.62];
            for c in 0..3 {
                px[c] += d * (disc_rgb[c] - px[c]);
            }

            let v = 0.75 * vessel[y * size + x];
            let vessel_rgb = [0.42, 0.08, 0.05];
            for c in 0..3 {
                px[c] += v * (vessel_rgb[c] - px[c]);
            }
            data.extend_from_slice(&px);
        }
    }
    Ok(ImageRGB::from_clamped(size, size, data))
}
