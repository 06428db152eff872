use super::TrainConfig;
use crate::error::{Error, Result};

/// Learning rate of `epoch`: linear warmup from 0 to `lr_init`, then a cosine
/// decay that reaches `lr_min` exactly at the last epoch.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    if epoch >= cfg.total_epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} outside 0..{}",
            cfg.total_epochs
        )));
    }
    if epoch < cfg.warmup_epochs {
        return Ok(cfg.lr_init * epoch as f64 / cfg.warmup_epochs as f64);
    }
    let span = cfg.total_epochs - 1 - cfg.warmup_epochs;
    let t = if span == 0 {
        0.0
    } else {
        (epoch - cfg.warmup_epochs) as f64 / span as f64
    };
    Ok(cfg.lr_min + (cfg.lr_init - cfg.lr_min) * (1.0 + (std::f64::consts::PI * t).cos()) / 2.0)
}
