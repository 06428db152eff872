use serde::{Deserialize, Serialize};

use super::layers::{
    conv_backward, conv_forward, max_pool, max_pool_backward, sigmoid, upsample,
    upsample_backward, Block, BlockTrace, ParamLayout,
};
use super::loss::focal_from_logits;
use super::{FeatureMap, NetConfig, Scalar};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ImageRGB, ScalarField};

/// Initial anomaly probability of a fresh network.
pub const HEAD_PRIOR: f64 = 0.01;

/// What the localization network receives from the reconstruction network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocInput {
    /// Encoder features concatenated at every level.
    Features,
    /// The reconstructed image concatenated to the input.
    Image,
    /// Nothing: a plain U-Net on the image.
    Plain,
}

/// Side information for one forward pass, matching a [`LocInput`].
#[derive(Debug, Clone, PartialEq)]
pub enum Guidance<T> {
    Features(Vec<FeatureMap<T>>),
    Image(FeatureMap<T>),
    None,
}

/// U-Net predicting a per-pixel anomaly probability.
///
/// With [`LocInput::Features`], level `i` of the encoder forwards
/// `concat(F_r[i], F_l[i])` both to the next level and to the decoder skip,
/// where `F_r[i]` is the reconstruction encoder's activation and `F_l[i]` the
/// block output at that level.
#[derive(Debug, Clone, PartialEq)]
pub struct LocNet<T = f32> {
    cfg: NetConfig,
    input: LocInput,
    layout: ParamLayout,
    enc: Vec<Block>,
    dec: Vec<Block>,
    head: usize,
    params: Vec<T>,
}

struct LocTrace<T> {
    /// Per-level reconstruction channels prepended to the skip.
    recon_channels: Vec<usize>,
    enc: Vec<BlockTrace<T>>,
    skips: Vec<FeatureMap<T>>,
    pools: Vec<Vec<u32>>,
    /// In execution order (level `levels - 2` first) with the upsampled channel count.
    dec: Vec<(BlockTrace<T>, usize)>,
    head_in: FeatureMap<T>,
    logits: FeatureMap<T>,
}

struct Arch {
    layout: ParamLayout,
    enc: Vec<Block>,
    dec: Vec<Block>,
    head: usize,
}

fn input_channels(input: LocInput) -> usize {
    match input {
        LocInput::Image => 6,
        LocInput::Features | LocInput::Plain => 3,
    }
}

fn recon_channels(cfg: &NetConfig, input: LocInput, level: usize) -> usize {
    match input {
        LocInput::Features => cfg.channels(level),
        LocInput::Image | LocInput::Plain => 0,
    }
}

fn skip_channels(cfg: &NetConfig, input: LocInput, level: usize) -> usize {
    recon_channels(cfg, input, level) + cfg.channels(level)
}

impl Arch {
    fn build(cfg: &NetConfig, input: LocInput) -> Result<Self> {
        cfg.validate()?;
        let levels = cfg.levels;
        let mut layout = ParamLayout::default();
        let enc = (0..levels)
            .map(|i| {
                let cin = if i == 0 {
                    input_channels(input)
                } else {
                    skip_channels(cfg, input, i - 1)
                };
                layout.push_block(&format!("enc{i}"), cin, cfg.channels(i))
            })
            .collect();
        let dec = (0..levels - 1)
            .map(|i| {
                let below = if i + 1 == levels - 1 {
                    skip_channels(cfg, input, i + 1)
                } else {
                    cfg.channels(i + 1)
                };
                let cin = below + skip_channels(cfg, input, i);
                layout.push_block(&format!("dec{i}"), cin, cfg.channels(i))
            })
            .collect();
        let head = layout.push("head".into(), cfg.channels(0), 1, 1);
        Ok(Self {
            layout,
            enc,
            dec,
            head,
        })
    }
}

impl<T: Scalar> LocNet<T> {
    /// Fresh network initialized from `cfg.seed`, with the head bias set so
    /// every pixel starts at probability [`HEAD_PRIOR`].
    pub fn new(cfg: NetConfig, input: LocInput) -> Result<Self> {
        let arch = Arch::build(&cfg, input)?;
        let mut params = arch.layout.init::<T>(cfg.seed);
        let bias = arch.layout.conv(arch.head).b_off;
        params[bias] = T::of((HEAD_PRIOR / (1.0 - HEAD_PRIOR)).ln());
        Self::from_params(cfg, input, params)
    }

    pub fn from_params(cfg: NetConfig, input: LocInput, params: Vec<T>) -> Result<Self> {
        let arch = Arch::build(&cfg, input)?;
        if params.len() != arch.layout.len() {
            return Err(Error::dims(arch.layout.len(), params.len()));
        }
        Ok(Self {
            cfg,
            input,
            layout: arch.layout,
            enc: arch.enc,
            dec: arch.dec,
            head: arch.head,
            params,
        })
    }

    pub fn layout_for(cfg: &NetConfig, input: LocInput) -> Result<ParamLayout> {
        Ok(Arch::build(cfg, input)?.layout)
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn input(&self) -> LocInput {
        self.input
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

    /// Channels of the level-`i` skip tensor: reconstruction plus localization channels.
    pub fn skip_channels(&self, level: usize) -> usize {
        skip_channels(&self.cfg, self.input, level)
    }

    /// Input channels of the encoder block at `level`.
    pub fn encoder_in_channels(&self, level: usize) -> usize {
        self.layout.conv(self.enc[level].c1).cin
    }

    /// Input channels of the decoder block producing `level`.
    pub fn decoder_in_channels(&self, level: usize) -> usize {
        self.layout.conv(self.dec[level].c1).cin
    }

    pub fn cast<U: Scalar>(&self) -> LocNet<U> {
        LocNet {
            cfg: self.cfg,
            input: self.input,
            layout: self.layout.clone(),
            enc: self.enc.clone(),
            dec: self.dec.clone(),
            head: self.head,
            params: self.params.iter().map(|p| U::of(p.f64())).collect(),
        }
    }

    /// Validates the guidance against the architecture and builds the level-0 input.
    fn prepare(&self, img: &ImageRGB, guidance: &Guidance<T>) -> Result<FeatureMap<T>> {
        let s = self.cfg.input_size;
        if img.dims() != (s, s) {
            return Err(Error::dims(format!("{s}x{s}"), format!("{:?}", img.dims())));
        }
        let x = FeatureMap::from_image(img);
        match (self.input, guidance) {
            (LocInput::Plain, Guidance::None) => Ok(x),
            (LocInput::Image, Guidance::Image(r)) => {
                if r.shape() != (3, s, s) {
                    return Err(Error::dims(format!("(3, {s}, {s})"), format!("{:?}", r.shape())));
                }
                x.concat(r)
            }
            (LocInput::Features, Guidance::Features(f)) => {
                if f.len() != self.cfg.levels {
                    return Err(Error::dims(
                        format!("{} feature levels", self.cfg.levels),
                        f.len(),
                    ));
                }
                for (i, fm) in f.iter().enumerate() {
                    let want = (self.cfg.channels(i), self.cfg.side(i), self.cfg.side(i));
                    if fm.shape() != want {
                        return Err(Error::dims(
                            format!("level {i} {want:?}"),
                            format!("{:?}", fm.shape()),
                        ));
                    }
                }
                Ok(x)
            }
            (mode, _) => Err(Error::InvalidArgument(format!(
                "guidance does not match localization input mode {mode:?}"
            ))),
        }
    }

    fn recon_at<'g>(&self, guidance: &'g Guidance<T>, level: usize) -> Option<&'g FeatureMap<T>> {
        match guidance {
            Guidance::Features(f) => Some(&f[level]),
            _ => None,
        }
    }

    fn forward_traced(&self, x: FeatureMap<T>, guidance: &Guidance<T>) -> Result<LocTrace<T>> {
        let levels = self.cfg.levels;
        let (layout, params) = (&self.layout, &self.params[..]);
        let mut scratch = Vec::new();
        let mut enc: Vec<BlockTrace<T>> = Vec::with_capacity(levels);
        let mut skips: Vec<FeatureMap<T>> = Vec::with_capacity(levels);
        let mut pools = Vec::with_capacity(levels - 1);
        let mut recon_channels = Vec::with_capacity(levels);
        let mut input = Some(x);
        for i in 0..levels {
            let inp = match input.take() {
                Some(x) => x,
                None => {
                    let (p, arg) = max_pool(&skips[i - 1]);
                    pools.push(arg);
                    p
                }
            };
            let t = self.enc[i].forward_traced(layout, params, inp, &mut scratch);
            let skip = match self.recon_at(guidance, i) {
                Some(r) => r.concat(t.output())?,
                None => t.output().clone(),
            };
            recon_channels.push(skip.channels() - t.output().channels());
            skips.push(skip);
            enc.push(t);
        }
        let mut dec = Vec::with_capacity(levels - 1);
        let mut y = skips[levels - 1].clone();
        for i in (0..levels - 1).rev() {
            let u = upsample(&y);
            let up_channels = u.channels();
            let t = self.dec[i].forward_traced(layout, params, u.concat(&skips[i])?, &mut scratch);
            y = t.output().clone();
            dec.push((t, up_channels));
        }
        let logits = conv_forward(layout.conv(self.head), params, &y, &mut scratch);
        Ok(LocTrace {
            recon_channels,
            enc,
            skips,
            pools,
            dec,
            head_in: y,
            logits,
        })
    }

    fn backward(&self, trace: &LocTrace<T>, d_logits: FeatureMap<T>) -> Vec<T> {
        let levels = self.cfg.levels;
        let (layout, params) = (&self.layout, &self.params[..]);
        let mut scratch = Vec::new();
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
        let mut d_skips: Vec<Option<FeatureMap<T>>> = vec![None; levels];
        let accumulate = |slot: &mut Option<FeatureMap<T>>, g: FeatureMap<T>| match slot {
            Some(acc) => acc.add_assign(&g),
            None => *slot = Some(g),
        };
        for ((t, up_channels), i) in trace.dec.iter().rev().zip(0..) {
            let d_cat = self.dec[i]
                .backward(layout, params, t, dy, &mut grad, true, &mut scratch)
                .expect("input gradient requested");
            let (d_up, d_skip) = d_cat.split(*up_channels);
            accumulate(&mut d_skips[i], d_skip);
            dy = upsample_backward(&d_up);
        }
        accumulate(&mut d_skips[levels - 1], dy);
        for i in (0..levels).rev() {
            let d_skip = d_skips[i].take().expect("every level receives a gradient");
            let (_, d_loc) = d_skip.split(trace.recon_channels[i]);
            let d_in = self.enc[i].backward(
                layout,
                params,
                &trace.enc[i],
                d_loc,
                &mut grad,
                i > 0,
                &mut scratch,
            );
            if let Some(d_in) = d_in {
                let g = max_pool_backward(&d_in, &trace.pools[i - 1], trace.skips[i - 1].shape());
                accumulate(&mut d_skips[i - 1], g);
            }
        }
        grad
    }

    /// Per-pixel logits at input resolution.
    pub fn logits(&self, img: &ImageRGB, guidance: &Guidance<T>) -> Result<FeatureMap<T>> {
        let x = self.prepare(img, guidance)?;
        let levels = self.cfg.levels;
        let (layout, params) = (&self.layout, &self.params[..]);
        let mut scratch = Vec::new();
        let mut skips: Vec<FeatureMap<T>> = Vec::with_capacity(levels);
        for i in 0..levels {
            let out = if i == 0 {
                self.enc[0].forward(layout, params, &x, &mut scratch)
            } else {
                let (p, _) = max_pool(&skips[i - 1]);
                self.enc[i].forward(layout, params, &p, &mut scratch)
            };
            skips.push(match self.recon_at(guidance, i) {
                Some(r) => r.concat(&out)?,
                None => out,
            });
        }
        let mut y = skips.pop().expect("levels >= 2");
        for i in (0..levels - 1).rev() {
            let cat = upsample(&y).concat(&skips[i])?;
            y = self.dec[i].forward(layout, params, &cat, &mut scratch);
        }
        Ok(conv_forward(layout.conv(self.head), params, &y, &mut scratch))
    }

    /// Anomaly probability map in `[0, 1]` at input resolution.
    pub fn forward(&self, img: &ImageRGB, guidance: &Guidance<T>) -> Result<ScalarField> {
        let z = self.logits(img, guidance)?;
        let probs = z.data().iter().map(|v| sigmoid(v.f64())).collect();
        ScalarField::new(z.height(), z.width(), probs)
    }

    /// Focal loss against `target` and its gradient with respect to this network's parameters.
    pub fn loss_and_grad(
        &self,
        img: &ImageRGB,
        guidance: &Guidance<T>,
        target: &BinaryMask,
        tau: f64,
    ) -> Result<(f64, Vec<T>)> {
        let x = self.prepare(img, guidance)?;
        if target.dims() != img.dims() {
            return Err(Error::dims(format!("{:?}", img.dims()), format!("{:?}", target.dims())));
        }
        let trace = self.forward_traced(x, guidance)?;
        let (loss, d) = focal_from_logits(trace.logits.data(), target.data(), tau);
        let (c, h, w) = trace.logits.shape();
        let d_logits = FeatureMap::new(c, h, w, d).expect("gradient has logit shape");
        Ok((loss, self.backward(&trace, d_logits)))
    }

    /// Focal loss without gradients.
    pub fn loss(
        &self,
        img: &ImageRGB,
        guidance: &Guidance<T>,
        target: &BinaryMask,
        tau: f64,
    ) -> Result<f64> {
        let z = self.logits(img, guidance)?;
        if target.dims() != img.dims() {
            return Err(Error::dims(format!("{:?}", img.dims()), format!("{:?}", target.dims())));
        }
        Ok(focal_from_logits(z.data(), target.data(), tau).0)
    }
}
