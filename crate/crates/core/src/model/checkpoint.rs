//! Versioned binary checkpoint container.
//!
//! Layout: 8-byte magic, `u32` format version, `u32` metadata length, UTF-8
//! JSON metadata, then every parameter as a little-endian `f64` in layout order.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::ParamTensor;
use super::recon::hash_params;
use super::{LocInput, LocNet, NetConfig, ReconNet, Scalar};
use crate::error::{Error, Result};
use crate::imaging::PreprocessConfig;

pub const MAGIC: &[u8; 8] = b"RSYNCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Which training stage produced a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Recon,
    Loc,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Recon => "recon",
            Stage::Loc => "loc",
        })
    }
}

/// Where a localization network's reconstruction encoder came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReconSource {
    /// A stage-1 checkpoint whose full parameter hash is recorded.
    Trained { param_hash: String },
    /// Untrained weights initialized from this seed.
    Random { seed: u64 },
    /// No reconstruction network is used.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocMeta {
    pub input: LocInput,
    pub recon: ReconSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: Stage,
    pub net: NetConfig,
    pub preprocess: PreprocessConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<LocMeta>,
    pub tensors: Vec<ParamTensor>,
    pub param_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: Vec<f64>,
}

fn to_f64<T: Scalar>(params: &[T]) -> Vec<f64> {
    params.iter().map(|p| p.f64()).collect()
}

impl Checkpoint {
    pub fn from_recon<T: Scalar>(net: &ReconNet<T>, preprocess: PreprocessConfig) -> Self {
        Self {
            meta: CheckpointMeta {
                stage: Stage::Recon,
                net: *net.config(),
                preprocess,
                loc: None,
                tensors: net.layout().tensors(),
                param_hash: net.param_hash(),
            },
            params: to_f64(net.params()),
        }
    }

    pub fn from_loc<T: Scalar>(
        net: &LocNet<T>,
        recon: ReconSource,
        preprocess: PreprocessConfig,
    ) -> Self {
        Self {
            meta: CheckpointMeta {
                stage: Stage::Loc,
                net: *net.config(),
                preprocess,
                loc: Some(LocMeta {
                    input: net.input(),
                    recon,
                }),
                tensors: net.layout().tensors(),
                param_hash: hash_params(net.params()),
            },
            params: to_f64(net.params()),
        }
    }

    pub fn stage(&self) -> Stage {
        self.meta.stage
    }

    pub fn expect_stage(&self, expected: Stage) -> Result<()> {
        if self.meta.stage != expected {
            return Err(Error::StageMismatch {
                expected: expected.to_string(),
                found: self.meta.stage.to_string(),
            });
        }
        Ok(())
    }

    pub fn recon_net<T: Scalar>(&self) -> Result<ReconNet<T>> {
        self.expect_stage(Stage::Recon)?;
        let layout = ReconNet::<T>::layout_for(&self.meta.net)?;
        self.check_tensors(&layout.tensors())?;
        ReconNet::from_params(self.meta.net, self.params.iter().map(|&p| T::of(p)).collect())
    }

    pub fn loc_net<T: Scalar>(&self) -> Result<LocNet<T>> {
        self.expect_stage(Stage::Loc)?;
        let meta = self.loc_meta()?;
        let layout = LocNet::<T>::layout_for(&self.meta.net, meta.input)?;
        self.check_tensors(&layout.tensors())?;
        LocNet::from_params(
            self.meta.net,
            meta.input,
            self.params.iter().map(|&p| T::of(p)).collect(),
        )
    }

    pub fn loc_meta(&self) -> Result<&LocMeta> {
        self.meta
            .loc
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("localization checkpoint without loc metadata".into()))
    }

    fn check_tensors(&self, expected: &[ParamTensor]) -> Result<()> {
        if self.meta.tensors != expected {
            return Err(Error::Checkpoint(
                "parameter tensors do not match the architecture in the metadata".into(),
            ));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)
            .map_err(|e| Error::Checkpoint(format!("metadata encoding: {e}")))?;
        let meta_len = u32::try_from(meta.len())
            .map_err(|_| Error::Checkpoint("metadata too large".into()))?;
        let mut out = Vec::with_capacity(16 + meta.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&meta_len.to_le_bytes());
        out.extend_from_slice(&meta);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let version = word(8);
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let meta_len = word(12) as usize;
        let body = bytes
            .get(16..16 + meta_len)
            .ok_or_else(|| bad("truncated metadata"))?;
        let meta: CheckpointMeta = serde_json::from_slice(body)
            .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        let raw = &bytes[16 + meta_len..];
        let expected: usize = meta.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        if raw.len() != 8 * expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} parameters, found {} bytes",
                raw.len()
            )));
        }
        let params: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if hash_params(&params) != meta.param_hash {
            return Err(bad("parameter hash mismatch (corrupted file)"));
        }
        Ok(Self { meta, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
