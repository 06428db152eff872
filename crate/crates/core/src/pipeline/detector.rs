use crate::error::{Error, Result};
use crate::imaging::{ImageRGB, PreprocessConfig, ScalarField};
use crate::model::{
    Checkpoint, FeatureMap, Guidance, LocInput, LocNet, NetConfig, ReconNet, ReconSource, Scalar,
};

/// Computes what the localization network needs from the reconstruction network.
pub(crate) fn guidance_for<T: Scalar>(
    recon: Option<&ReconNet<T>>,
    input: LocInput,
    x: &FeatureMap<T>,
) -> Result<Guidance<T>> {
    let need = || {
        recon.ok_or_else(|| {
            Error::InvalidArgument(format!("localization input {input:?} needs a reconstruction network"))
        })
    };
    Ok(match input {
        LocInput::Plain => Guidance::None,
        LocInput::Features => Guidance::Features(need()?.encode(x)?),
        LocInput::Image => Guidance::Image(need()?.reconstruct(x)?),
    })
}

/// A trained localization network with the reconstruction network it was trained against.
#[derive(Debug, Clone)]
pub struct Detector {
    recon: Option<ReconNet<f32>>,
    loc: LocNet<f32>,
    preprocess: PreprocessConfig,
}

fn same_architecture(a: &NetConfig, b: &NetConfig) -> bool {
    (a.levels, a.base_channels, a.input_size) == (b.levels, b.base_channels, b.input_size)
}

impl Detector {
    pub fn new(
        loc: LocNet<f32>,
        recon: Option<ReconNet<f32>>,
        preprocess: PreprocessConfig,
    ) -> Result<Self> {
        if loc.input() != LocInput::Plain {
            let r = recon.as_ref().ok_or_else(|| {
                Error::Checkpoint("localization network needs a reconstruction network".into())
            })?;
            if !same_architecture(r.config(), loc.config()) {
                return Err(Error::Checkpoint(format!(
                    "mismatched checkpoints: reconstruction {:?} vs localization {:?}",
                    r.config(),
                    loc.config()
                )));
            }
        }
        let recon = if loc.input() == LocInput::Plain { None } else { recon };
        Ok(Self {
            recon,
            loc,
            preprocess,
        })
    }

    /// Rebuilds the detector from a stage-2 checkpoint and, when it used a trained
    /// encoder, the matching stage-1 checkpoint.
    pub fn from_checkpoints(loc_ckpt: &Checkpoint, recon_ckpt: Option<&Checkpoint>) -> Result<Self> {
        let loc = loc_ckpt.loc_net::<f32>()?;
        let meta = loc_ckpt.loc_meta()?;
        let recon = match &meta.recon {
            ReconSource::None => None,
            ReconSource::Random { seed } => Some(ReconNet::new(NetConfig {
                seed: *seed,
                ..*loc.config()
            })?),
            ReconSource::Trained { param_hash } => {
                let ckpt = recon_ckpt.ok_or_else(|| {
                    Error::Checkpoint("this localization checkpoint needs its stage-1 checkpoint".into())
                })?;
                let net = ckpt.recon_net::<f32>()?;
                if &net.param_hash() != param_hash {
                    return Err(Error::Checkpoint(
                        "mismatched checkpoints: stage-1 parameters differ from the ones used in training"
                            .into(),
                    ));
                }
                Some(net)
            }
        };
        Self::new(loc, recon, loc_ckpt.meta.preprocess.clone())
    }

    pub fn preprocess(&self) -> &PreprocessConfig {
        &self.preprocess
    }

    pub fn loc(&self) -> &LocNet<f32> {
        &self.loc
    }

    pub fn recon(&self) -> Option<&ReconNet<f32>> {
        self.recon.as_ref()
    }

    /// Probability map of an image that is already at network resolution.
    pub fn predict_preprocessed(&self, img: &ImageRGB) -> Result<ScalarField> {
        let x = FeatureMap::from_image(img);
        let g = guidance_for(self.recon.as_ref(), self.loc.input(), &x)?;
        self.loc.forward(img, &g)
    }

    /// Preprocesses (resize, CLAHE) and predicts; the map has the preprocessed size.
    pub fn predict(&self, img: &ImageRGB) -> Result<ScalarField> {
        self.predict_preprocessed(&self.preprocess.apply(img)?)
    }
}

/// Per-pixel anomaly probabilities of `img` at network resolution.
pub fn predict(
    loc_ckpt: &Checkpoint,
    recon_ckpt: Option<&Checkpoint>,
    img: &ImageRGB,
) -> Result<ScalarField> {
    Detector::from_checkpoints(loc_ckpt, recon_ckpt)?.predict(img)
}
