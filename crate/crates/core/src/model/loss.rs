//! Reconstruction (mean squared error) and focal losses.
//!
//! The public functions take probabilities. The crate-internal variants take
//! the network's logits and also return `dL/dlogit`.

use super::layers::sigmoid;
use super::{LossConfig, Scalar};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ImageRGB, ScalarField};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Mean over pixels and channels of the squared difference.
pub fn recon_loss(recon: &ImageRGB, img: &ImageRGB) -> Result<f64> {
    if recon.dims() != img.dims() {
        return Err(Error::dims(format!("{:?}", img.dims()), format!("{:?}", recon.dims())));
    }
    let n = recon.data().len() as f64;
    Ok(recon
        .data()
        .iter()
        .zip(img.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

#[inline]
fn focal_term(p: f64, positive: bool, tau: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if positive {
        -(1.0 - p).powf(tau) * p.ln()
    } else {
        -p.powf(tau) * (1.0 - p).ln()
    }
}

/// Mean per-pixel focal loss of probability map `pred` against `target`.
pub fn focal_loss(pred: &ScalarField, target: &BinaryMask, cfg: &LossConfig) -> Result<f64> {
    if pred.dims() != target.dims() {
        return Err(Error::dims(format!("{:?}", target.dims()), format!("{:?}", pred.dims())));
    }
    cfg.validate()?;
    let n = pred.data().len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &m)| focal_term(p, m != 0, cfg.tau))
        .sum::<f64>()
        / n)
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Focal loss on logits; the gradient is taken through the unclamped sigmoid.
pub(crate) fn focal_from_logits<T: Scalar>(logits: &[T], target: &[u8], tau: f64) -> (f64, Vec<T>) {
    assert_eq!(logits.len(), target.len());
    let n = logits.len() as f64;
    let mut total = 0.0;
    let grad = logits
        .iter()
        .zip(target)
        .map(|(&z, &m)| {
            let z = z.f64();
            let p = sigmoid(z);
            let q = sigmoid(-z);
            total += focal_term(p, m != 0, tau);
            let g = if m != 0 {
                let log_p = -softplus(-z);
                tau * q.powf(tau) * p * log_p - q.powf(tau + 1.0)
            } else {
                let log_q = -softplus(z);
                -tau * p.powf(tau) * q * log_q + p.powf(tau + 1.0)
            };
            T::of(g / n)
        })
        .collect();
    (total / n, grad)
}

/// Squared error between `sigmoid(logits)` and `target`, averaged.
pub(crate) fn recon_from_logits<T: Scalar>(logits: &[T], target: &[T]) -> (f64, Vec<T>) {
    assert_eq!(logits.len(), target.len());
    let n = logits.len() as f64;
    let mut total = 0.0;
    let grad = logits
        .iter()
        .zip(target)
        .map(|(&z, &t)| {
            let p = sigmoid(z.f64());
            let d = p - t.f64();
            total += d * d;
            T::of(2.0 * d * p * (1.0 - p) / n)
        })
        .collect();
    (total / n, grad)
}
