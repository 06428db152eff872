//! Central finite-difference verification of analytic gradients.

use serde::Serialize;

use super::{Guidance, LocNet, ReconNet};
use crate::error::Result;
use crate::imaging::{BinaryMask, ImageRGB};

/// Step used by the network checks.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor of the relative error: components whose analytic and
/// numeric values are both below it are effectively compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub n_params: usize,
    /// `max |a - n| / max(|a|, |n|, REL_FLOOR)` over all parameters.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_index: usize,
    pub analytic_norm: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `analytic` with `(f(θ + h e_i) - f(θ - h e_i)) / 2h` for every `i`.
pub fn grad_check(
    f: impl Fn(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    h: f64,
    tolerance: f64,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len());
    let mut theta = params.to_vec();
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut worst = 0;
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + h;
        let up = f(&theta);
        theta[i] = orig - h;
        let down = f(&theta);
        theta[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let abs = (numeric - analytic[i]).abs();
        let rel = abs / numeric.abs().max(analytic[i].abs()).max(REL_FLOOR);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
        max_abs = max_abs.max(abs);
    }
    GradCheckReport {
        n_params: params.len(),
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        worst_index: worst,
        analytic_norm: analytic.iter().map(|g| g * g).sum::<f64>().sqrt(),
        tolerance,
        passed: max_rel < tolerance,
    }
}

/// Checks the reconstruction loss gradient of `net` on `img` (target = input).
pub fn grad_check_recon(
    net: &ReconNet<f64>,
    img: &ImageRGB,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = net.loss_and_grad(img, img)?;
    let cfg = *net.config();
    let f = |theta: &[f64]| {
        ReconNet::from_params(cfg, theta.to_vec())
            .and_then(|n| n.loss(img, img))
            .expect("shapes were validated by the analytic pass")
    };
    Ok(grad_check(f, net.params(), &analytic, h, tolerance))
}

/// Checks the focal loss gradient of `net` with fixed guidance.
pub fn grad_check_loc(
    net: &LocNet<f64>,
    img: &ImageRGB,
    guidance: &Guidance<f64>,
    target: &BinaryMask,
    tau: f64,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = net.loss_and_grad(img, guidance, target, tau)?;
    let (cfg, input) = (*net.config(), net.input());
    let f = |theta: &[f64]| {
        LocNet::from_params(cfg, input, theta.to_vec())
            .and_then(|n| n.loss(img, guidance, target, tau))
            .expect("shapes were validated by the analytic pass")
    };
    Ok(grad_check(f, net.params(), &analytic, h, tolerance))
}
