use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture of both networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// Encoder resolution levels; level `i` runs at `input_size / 2^i`.
    pub levels: usize,
    /// Channels at level 0; each deeper level doubles them.
    pub base_channels: usize,
    /// Side of the square input.
    pub input_size: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            base_channels: 32,
            input_size: 768,
            seed: 0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Config(format!("levels must be >= 2, got {}", self.levels)));
        }
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        let stride = 1usize
            .checked_shl(self.levels as u32 - 1)
            .filter(|s| *s <= self.input_size)
            .ok_or_else(|| Error::Config(format!("{} levels is too deep", self.levels)))?;
        if self.input_size == 0 || self.input_size % stride != 0 {
            return Err(Error::Config(format!(
                "input_size {} must be a positive multiple of {stride}",
                self.input_size
            )));
        }
        Ok(())
    }

    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }

    pub fn side(&self, level: usize) -> usize {
        self.input_size >> level
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    #[default]
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Focusing parameter of the focal loss.
    pub tau: f64,
    pub recon_reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 2.0,
            recon_reduction: Reduction::Mean,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        Ok(())
    }
}
