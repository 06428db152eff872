use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::PreprocessConfig;
use crate::model::{AdamConfig, LocInput, LossConfig, NetConfig};
use crate::synth::SynthConfig;

/// How reconstruction information reaches the localization network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcatMode {
    /// Per-level encoder features.
    #[default]
    Feature,
    /// The reconstructed image, concatenated to the input.
    Image,
}

/// Where lesion source crops come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceDomain {
    /// Other normal images of the training set.
    #[default]
    Fundus,
    /// Procedural non-fundus textures.
    Texture,
}

/// Switches that rewire stage 2 for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub use_recon_features: bool,
    /// Use an untrained, randomly initialized reconstruction encoder.
    pub recon_features_random: bool,
    pub concat_mode: ConcatMode,
    pub source_domain: SourceDomain,
    pub use_self_mix: bool,
    pub use_perlin_mask: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            use_recon_features: true,
            recon_features_random: false,
            concat_mode: ConcatMode::Feature,
            source_domain: SourceDomain::Fundus,
            use_self_mix: true,
            use_perlin_mask: true,
        }
    }
}

impl Ablation {
    pub fn loc_input(&self) -> LocInput {
        match (self.use_recon_features, self.concat_mode) {
            (false, _) => LocInput::Plain,
            (true, ConcatMode::Feature) => LocInput::Features,
            (true, ConcatMode::Image) => LocInput::Image,
        }
    }

    /// Whether stage 2 needs a trained stage-1 checkpoint.
    pub fn needs_trained_recon(&self) -> bool {
        self.use_recon_features && !self.recon_features_random
    }

    /// The generator config with this ablation's lesion-shape switches applied.
    pub fn synth_config(&self, base: &SynthConfig) -> SynthConfig {
        SynthConfig {
            use_self_mix: base.use_self_mix && self.use_self_mix,
            use_perlin_mask: base.use_perlin_mask && self.use_perlin_mask,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub lr_min: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_init: 5e-5,
            lr_min: 2.5e-5,
            warmup_epochs: 50,
            total_epochs: 400,
            batch_size: 4,
            seed: 0,
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            ablation: Ablation::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_init && self.lr_init.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < lr_min <= lr_init, got lr_min={} lr_init={}",
                self.lr_min, self.lr_init
            )));
        }
        if self.warmup_epochs >= self.total_epochs {
            return Err(Error::Config(format!(
                "warmup_epochs ({}) must be below total_epochs ({})",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        self.adam.validate()?;
        self.loss.validate()
    }
}

/// Everything a run needs, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub preprocess: PreprocessConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.preprocess.input_size != self.net.input_size {
            return Err(Error::Config(format!(
                "preprocess.input_size ({}) must equal net.input_size ({})",
                self.preprocess.input_size, self.net.input_size
            )));
        }
        self.train.validate()?;
        self.synth.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}
