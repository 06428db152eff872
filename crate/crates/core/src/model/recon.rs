use sha2::{Digest, Sha256};

use super::layers::{
    conv_backward, conv_forward, max_pool, max_pool_backward, sigmoid, upsample,
    upsample_backward, Block, BlockTrace, ParamLayout,
};
use super::loss::recon_from_logits;
use super::{FeatureMap, NetConfig, Scalar};
use crate::error::{Error, Result};
use crate::imaging::ImageRGB;

/// Convolutional autoencoder without skip connections.
///
/// The encoder has one block per level (2x max-pool between levels, channels
/// doubling); the decoder mirrors it with nearest 2x upsampling and a 1x1
/// sigmoid head back to RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconNet<T = f32> {
    cfg: NetConfig,
    layout: ParamLayout,
    enc: Vec<Block>,
    /// `dec[i]` produces level `i` from level `i + 1`.
    dec: Vec<Block>,
    head: usize,
    /// Parameters `[..encoder_len]` belong to the encoder.
    encoder_len: usize,
    params: Vec<T>,
}

struct ReconTrace<T> {
    enc: Vec<BlockTrace<T>>,
    pools: Vec<(Vec<u32>, (usize, usize, usize))>,
    /// In execution order: level `levels - 2` first.
    dec: Vec<BlockTrace<T>>,
    head_in: FeatureMap<T>,
    logits: FeatureMap<T>,
}

pub(crate) fn hash_params<T: Scalar>(params: &[T]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.f64().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct Arch {
    layout: ParamLayout,
    enc: Vec<Block>,
    dec: Vec<Block>,
    head: usize,
    encoder_len: usize,
}

impl Arch {
    fn build(cfg: &NetConfig) -> Result<Self> {
        cfg.validate()?;
        let mut layout = ParamLayout::default();
        let enc = (0..cfg.levels)
            .map(|i| {
                let cin = if i == 0 { 3 } else { cfg.channels(i - 1) };
                layout.push_block(&format!("enc{i}"), cin, cfg.channels(i))
            })
            .collect();
        let encoder_len = layout.len();
        let dec = (0..cfg.levels - 1)
            .map(|i| layout.push_block(&format!("dec{i}"), cfg.channels(i + 1), cfg.channels(i)))
            .collect();
        let head = layout.push("head".into(), cfg.channels(0), 3, 1);
        Ok(Self {
            layout,
            enc,
            dec,
            head,
            encoder_len,
        })
    }
}

impl<T: Scalar> ReconNet<T> {
    /// Fresh network initialized from `cfg.seed`.
    pub fn new(cfg: NetConfig) -> Result<Self> {
        let layout = Self::layout_for(&cfg)?;
        let params = layout.init(cfg.seed);
        Self::from_params(cfg, params)
    }

    pub fn from_params(cfg: NetConfig, params: Vec<T>) -> Result<Self> {
        let arch = Arch::build(&cfg)?;
        if params.len() != arch.layout.len() {
            return Err(Error::dims(arch.layout.len(), params.len()));
        }
        Ok(Self {
            cfg,
            layout: arch.layout,
            enc: arch.enc,
            dec: arch.dec,
            head: arch.head,
            encoder_len: arch.encoder_len,
            params,
        })
    }

    pub fn layout_for(cfg: &NetConfig) -> Result<ParamLayout> {
        Ok(Arch::build(cfg)?.layout)
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn encoder_params(&self) -> &[T] {
        &self.params[..self.encoder_len]
    }

    /// SHA-256 over the encoder parameters (as little-endian f64).
    pub fn encoder_hash(&self) -> String {
        hash_params(self.encoder_params())
    }

    /// SHA-256 over all parameters.
    pub fn param_hash(&self) -> String {
        hash_params(&self.params)
    }

    pub fn cast<U: Scalar>(&self) -> ReconNet<U> {
        ReconNet {
            cfg: self.cfg,
            layout: self.layout.clone(),
            enc: self.enc.clone(),
            dec: self.dec.clone(),
            head: self.head,
            encoder_len: self.encoder_len,
            params: self.params.iter().map(|p| U::of(p.f64())).collect(),
        }
    }

    pub(crate) fn check_input(&self, h: usize, w: usize) -> Result<()> {
        let s = self.cfg.input_size;
        if (h, w) != (s, s) {
            return Err(Error::dims(format!("{s}x{s}"), format!("{h}x{w}")));
        }
        Ok(())
    }

    /// Per-level encoder activations; entry `i` has `channels(i)` channels at `input_size / 2^i`.
    pub fn encode(&self, x: &FeatureMap<T>) -> Result<Vec<FeatureMap<T>>> {
        self.check_input(x.height(), x.width())?;
        if x.channels() != 3 {
            return Err(Error::dims("3 channels", x.channels()));
        }
        let mut scratch = Vec::new();
        let mut feats: Vec<FeatureMap<T>> = Vec::with_capacity(self.cfg.levels);
        for (i, block) in self.enc.iter().enumerate() {
            let f = if i == 0 {
                block.forward(&self.layout, &self.params, x, &mut scratch)
            } else {
                let (p, _) = max_pool(&feats[i - 1]);
                block.forward(&self.layout, &self.params, &p, &mut scratch)
            };
            feats.push(f);
        }
        Ok(feats)
    }

    /// The reconstruction's logits from the bottleneck feature.
    fn decode_logits(&self, bottleneck: FeatureMap<T>) -> FeatureMap<T> {
        let mut scratch = Vec::new();
        let mut y = bottleneck;
        for i in (0..self.cfg.levels - 1).rev() {
            let u = upsample(&y);
            y = self.dec[i].forward(&self.layout, &self.params, &u, &mut scratch);
        }
        conv_forward(self.layout.conv(self.head), &self.params, &y, &mut scratch)
    }

    /// Reconstruction as a three-channel map in `[0, 1]`.
    pub fn reconstruct(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let mut feats = self.encode(x)?;
        let mut out = self.decode_logits(feats.pop().expect("levels >= 2"));
        for v in out.data_mut() {
            *v = T::of(sigmoid(v.f64()));
        }
        Ok(out)
    }

    pub fn forward(&self, img: &ImageRGB) -> Result<ImageRGB> {
        self.reconstruct(&FeatureMap::from_image(img))?.to_image()
    }

    /// Encoder activations of `img`, one per level.
    pub fn extract_features(&self, img: &ImageRGB) -> Result<Vec<FeatureMap<T>>> {
        self.encode(&FeatureMap::from_image(img))
    }

    fn forward_traced(&self, x: FeatureMap<T>) -> ReconTrace<T> {
        let mut scratch = Vec::new();
        let (layout, params) = (&self.layout, &self.params[..]);
        let mut enc = Vec::with_capacity(self.cfg.levels);
        let mut pools = Vec::with_capacity(self.cfg.levels - 1);
        enc.push(self.enc[0].forward_traced(layout, params, x, &mut scratch));
        for i in 1..self.cfg.levels {
            let prev: &FeatureMap<T> = enc[i - 1].output();
            let (p, arg) = max_pool(prev);
            pools.push((arg, prev.shape()));
            enc.push(self.enc[i].forward_traced(layout, params, p, &mut scratch));
        }
        let mut dec = Vec::with_capacity(self.cfg.levels - 1);
        let mut y = enc.last().expect("levels >= 2").output().clone();
        for i in (0..self.cfg.levels - 1).rev() {
            let t = self.dec[i].forward_traced(layout, params, upsample(&y), &mut scratch);
            y = t.output().clone();
            dec.push(t);
        }
        let logits = conv_forward(layout.conv(self.head), params, &y, &mut scratch);
        ReconTrace {
            enc,
            pools,
            dec,
            head_in: y,
            logits,
        }
    }

    fn backward(&self, trace: &ReconTrace<T>, d_logits: FeatureMap<T>) -> Vec<T> {
        let mut scratch = Vec::new();
        let (layout, params) = (&self.layout, &self.params[..]);
        let mut grad = vec![T::zero(); self.params.len()];
        let mut dy = conv_backward(
            layout.conv(self.head),
            params,
            &trace.head_in,
            &d_logits,
            &mut grad,
            true,
            &mut scratch,
        )
        .expect("input gradient requested");
        for (t, i) in trace.dec.iter().rev().zip(0..) {
            let du = self.dec[i]
                .backward(layout, params, t, dy, &mut grad, true, &mut scratch)
                .expect("input gradient requested");
            dy = upsample_backward(&du);
        }
        for i in (0..self.cfg.levels).rev() {
            let d_in = self.enc[i].backward(
                layout,
                params,
                &trace.enc[i],
                dy,
                &mut grad,
                i > 0,
                &mut scratch,
            );
            if i == 0 {
                break;
            }
            let (arg, shape) = &trace.pools[i - 1];
            dy = max_pool_backward(&d_in.expect("input gradient requested"), arg, *shape);
        }
        grad
    }

    /// Reconstruction loss of `input` against `target` and its parameter gradient.
    pub fn loss_and_grad(&self, input: &ImageRGB, target: &ImageRGB) -> Result<(f64, Vec<T>)> {
        self.check_input(input.height(), input.width())?;
        if input.dims() != target.dims() {
            return Err(Error::dims(format!("{:?}", input.dims()), format!("{:?}", target.dims())));
        }
        let trace = self.forward_traced(FeatureMap::from_image(input));
        let t = FeatureMap::<T>::from_image(target);
        let (loss, d) = recon_from_logits(trace.logits.data(), t.data());
        let (c, h, w) = trace.logits.shape();
        let d_logits = FeatureMap::new(c, h, w, d).expect("gradient has logit shape");
        Ok((loss, self.backward(&trace, d_logits)))
    }

    /// Reconstruction loss without gradients.
    pub fn loss(&self, input: &ImageRGB, target: &ImageRGB) -> Result<f64> {
        self.check_input(input.height(), input.width())?;
        let mut feats = self.encode(&FeatureMap::from_image(input))?;
        let logits = self.decode_logits(feats.pop().expect("levels >= 2"));
        let t = FeatureMap::<T>::from_image(target);
        if t.shape() != logits.shape() {
            return Err(Error::dims(format!("{:?}", logits.shape()), format!("{:?}", t.shape())));
        }
        Ok(recon_from_logits(logits.data(), t.data()).0)
    }
}
