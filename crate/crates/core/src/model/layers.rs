//! Convolution (im2col + GEMM), LeakyReLU, 2x max-pool and nearest 2x upsampling,
//! each with its backward pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use std::any::TypeId;

use super::scalar::{gemm, View};
use super::simd::{self, Conv3};
use super::{FeatureMap, Scalar};

pub const LEAKY_SLOPE: f64 = 0.01;

/// One "same"-padded convolution and where its weights live in the flat parameter vector.
///
/// Weights are `[cout][cin][k][k]` starting at `w_off`; the `cout` biases follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl ConvSpec {
    pub fn fan_in(&self) -> usize {
        self.cin * self.k * self.k
    }

    pub fn n_weights(&self) -> usize {
        self.cout * self.fan_in()
    }
}

/// Name and shape of one stored parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Ordered list of convolutions sharing one flat parameter vector.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamLayout {
    convs: Vec<ConvSpec>,
    len: usize,
}

impl ParamLayout {
    pub(crate) fn push(&mut self, name: String, cin: usize, cout: usize, k: usize) -> usize {
        let w_off = self.len;
        let b_off = w_off + cout * cin * k * k;
        self.len = b_off + cout;
        self.convs.push(ConvSpec {
            name,
            cin,
            cout,
            k,
            w_off,
            b_off,
        });
        self.convs.len() - 1
    }

    pub(crate) fn push_block(&mut self, name: &str, cin: usize, cout: usize) -> Block {
        Block {
            c1: self.push(format!("{name}.conv1"), cin, cout, 3),
            c2: self.push(format!("{name}.conv2"), cout, cout, 3),
        }
    }

    /// Number of scalar parameters.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn convs(&self) -> &[ConvSpec] {
        &self.convs
    }

    pub fn conv(&self, i: usize) -> &ConvSpec {
        &self.convs[i]
    }

    /// Tensors in storage order.
    pub fn tensors(&self) -> Vec<ParamTensor> {
        self.convs
            .iter()
            .flat_map(|c| {
                [
                    ParamTensor {
                        name: format!("{}.weight", c.name),
                        shape: vec![c.cout, c.cin, c.k, c.k],
                    },
                    ParamTensor {
                        name: format!("{}.bias", c.name),
                        shape: vec![c.cout],
                    },
                ]
            })
            .collect()
    }

    /// Weights uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn init<T: Scalar>(&self, seed: u64) -> Vec<T> {
        let mut rng = crate::seed::rng(seed);
        let mut params = vec![T::zero(); self.len];
        for c in &self.convs {
            let bound = (6.0 / c.fan_in() as f64).sqrt();
            for w in &mut params[c.w_off..c.w_off + c.n_weights()] {
                *w = T::of(rng.gen_range(-bound..bound));
            }
        }
        params
    }
}

/// Two 3x3 convolutions, each followed by LeakyReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Block {
    pub c1: usize,
    pub c2: usize,
}

/// Activations a block keeps for its backward pass.
pub(crate) struct BlockTrace<T> {
    input: FeatureMap<T>,
    mid: FeatureMap<T>,
    out: FeatureMap<T>,
}

impl<T: Scalar> BlockTrace<T> {
    pub fn output(&self) -> &FeatureMap<T> {
        &self.out
    }
}

impl Block {
    pub fn forward<T: Scalar>(
        &self,
        layout: &ParamLayout,
        params: &[T],
        x: &FeatureMap<T>,
        scratch: &mut Vec<T>,
    ) -> FeatureMap<T> {
        let mut a = conv_forward(layout.conv(self.c1), params, x, scratch);
        leaky_relu(&mut a);
        let mut b = conv_forward(layout.conv(self.c2), params, &a, scratch);
        leaky_relu(&mut b);
        b
    }

    pub fn forward_traced<T: Scalar>(
        &self,
        layout: &ParamLayout,
        params: &[T],
        input: FeatureMap<T>,
        scratch: &mut Vec<T>,
    ) -> BlockTrace<T> {
        let mut mid = conv_forward(layout.conv(self.c1), params, &input, scratch);
        leaky_relu(&mut mid);
        let mut out = conv_forward(layout.conv(self.c2), params, &mid, scratch);
        leaky_relu(&mut out);
        BlockTrace { input, mid, out }
    }

    /// Accumulates parameter gradients; returns the input gradient when asked.
    pub fn backward<T: Scalar>(
        &self,
        layout: &ParamLayout,
        params: &[T],
        trace: &BlockTrace<T>,
        mut d_out: FeatureMap<T>,
        grad: &mut [T],
        want_input_grad: bool,
        scratch: &mut Vec<T>,
    ) -> Option<FeatureMap<T>> {
        leaky_relu_backward(&trace.out, &mut d_out);
        let mut d_mid = conv_backward(
            layout.conv(self.c2),
            params,
            &trace.mid,
            &d_out,
            grad,
            true,
            scratch,
        )
        .expect("input gradient requested");
        leaky_relu_backward(&trace.mid, &mut d_mid);
        conv_backward(
            layout.conv(self.c1),
            params,
            &trace.input,
            &d_mid,
            grad,
            want_input_grad,
            scratch,
        )
    }
}

/// Column-buffer budget (elements) per row band; keeps each band cache-resident.
const BAND_ELEMS: usize = 1 << 15;

/// Rows per band for an input of width `w` and `kk` column rows.
fn band_rows(kk: usize, w: usize, h: usize) -> usize {
    (BAND_ELEMS / (kk * w).max(1)).clamp(1, h)
}

/// Horizontal extent `x0..x1` of output pixels whose tap at offset `dx` lands inside a row of width `w`.
fn tap_span(dx: isize, w: usize) -> (usize, usize) {
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx).clamp(0, w as isize) as usize;
    (x0, x1.max(x0))
}

/// Patch matrix of output rows `y0..y1`: row `(ci, ky, kx)`, column `(y - y0) * w + x`.
fn im2col_rows<T: Scalar>(x: &FeatureMap<T>, k: usize, y0: usize, y1: usize, col: &mut Vec<T>) {
    let (c, h, w) = x.shape();
    let npx = (y1 - y0) * w;
    let pad = (k / 2) as isize;
    col.clear();
    col.resize(c * k * k * npx, T::zero());
    for (ci, plane) in x.data().chunks_exact(h * w).enumerate() {
        for ky in 0..k {
            let dy = ky as isize - pad;
            for kx in 0..k {
                let dx = kx as isize - pad;
                let row = &mut col[((ci * k + ky) * k + kx) * npx..][..npx];
                let (x0, x1) = tap_span(dx, w);
                for y in y0..y1 {
                    let sy = y as isize + dy;
                    if x0 == x1 || sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s0 = (sy as usize * w) as isize + x0 as isize + dx;
                    let r = (y - y0) * w;
                    row[r + x0..r + x1].copy_from_slice(&plane[s0 as usize..][..x1 - x0]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col_rows`]: accumulates `col` into `dx`.
fn col2im_rows<T: Scalar>(col: &[T], k: usize, y0: usize, y1: usize, dx_map: &mut FeatureMap<T>) {
    let (_, h, w) = dx_map.shape();
    let npx = (y1 - y0) * w;
    let pad = (k / 2) as isize;
    for (ci, plane) in dx_map.data_mut().chunks_exact_mut(h * w).enumerate() {
        for ky in 0..k {
            let dy = ky as isize - pad;
            for kx in 0..k {
                let dx = kx as isize - pad;
                let row = &col[((ci * k + ky) * k + kx) * npx..][..npx];
                let (x0, x1) = tap_span(dx, w);
                for y in y0..y1 {
                    let sy = y as isize + dy;
                    if x0 == x1 || sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s0 = (sy as usize * w) as isize + x0 as isize + dx;
                    let r = (y - y0) * w;
                    let dst = &mut plane[s0 as usize..][..x1 - x0];
                    for (d, &g) in dst.iter_mut().zip(&row[r + x0..r + x1]) {
                        *d = *d + g;
                    }
                }
            }
        }
    }
}

/// Reinterprets a slice as `f32` when `T` is `f32`.
fn as_f32<T: Scalar>(s: &[T]) -> Option<&[f32]> {
    (TypeId::of::<T>() == TypeId::of::<f32>())
        // SAFETY: `T` is `f32`, so layout and validity are identical.
        .then(|| unsafe { std::slice::from_raw_parts(s.as_ptr().cast::<f32>(), s.len()) })
}

fn as_f32_mut<T: Scalar>(s: &mut [T]) -> Option<&mut [f32]> {
    (TypeId::of::<T>() == TypeId::of::<f32>())
        // SAFETY: as in `as_f32`; the unique borrow is carried over.
        .then(|| unsafe { std::slice::from_raw_parts_mut(s.as_mut_ptr().cast::<f32>(), s.len()) })
}

/// `c` planes of `h x w` copied into zero-padded `(h + 2) x (w + 2)` planes.
fn pad1(data: &[f32], c: usize, h: usize, w: usize) -> Vec<f32> {
    let pw = w + 2;
    let plane = (h + 2) * pw;
    let mut out = vec![0.0; c * plane];
    for (ci, src) in data.chunks_exact(h * w).take(c).enumerate() {
        for (y, row) in src.chunks_exact(w).enumerate() {
            let at = ci * plane + (y + 1) * pw + 1;
            out[at..at + w].copy_from_slice(row);
        }
    }
    out
}

/// Direct-kernel forward for `f32` 3x3 convolutions; `None` when not applicable.
fn conv3_forward_fast<T: Scalar>(spec: &ConvSpec, params: &[T], x: &FeatureMap<T>) -> Option<FeatureMap<T>> {
    let (_, h, w) = x.shape();
    if spec.k != 3 || !simd::supported(w, spec.cout) {
        return None;
    }
    let params = as_f32(params)?;
    let xp = pad1(as_f32(x.data())?, spec.cin, h, w);
    let mut out = FeatureMap::<T>::zeros(spec.cout, h, w);
    let problem = Conv3 {
        x: &xp,
        cin: spec.cin,
        h,
        w,
        weights: &params[spec.w_off..][..spec.n_weights()],
        cout: spec.cout,
    };
    simd::conv3_forward(&problem, Some(&params[spec.b_off..][..spec.cout]), as_f32_mut(out.data_mut())?);
    Some(out)
}

/// Direct-kernel backward for `f32` 3x3 convolutions; `None` (with `grad` untouched)
/// when not applicable.
fn conv3_backward_fast<T: Scalar>(
    spec: &ConvSpec,
    params: &[T],
    x: &FeatureMap<T>,
    d_out: &FeatureMap<T>,
    grad: &mut [T],
    want_input_grad: bool,
) -> Option<Option<FeatureMap<T>>> {
    let (_, h, w) = x.shape();
    let usable = spec.k == 3
        && simd::supported(w, spec.cout)
        && (!want_input_grad || simd::supported(w, spec.cin));
    if !usable {
        return None;
    }
    let params = as_f32(params)?;
    let grad = as_f32_mut(grad)?;
    let d_out = as_f32(d_out.data())?;
    let (cin, cout) = (spec.cin, spec.cout);
    let weights = &params[spec.w_off..][..spec.n_weights()];
    let xp = pad1(as_f32(x.data())?, cin, h, w);
    let problem = Conv3 { x: &xp, cin, h, w, weights, cout };
    simd::conv3_weight_grad(&problem, d_out, &mut grad[spec.w_off..][..spec.n_weights()]);
    for (o, plane) in d_out.chunks_exact(h * w).enumerate() {
        grad[spec.b_off + o] += plane.iter().sum::<f32>();
    }
    if !want_input_grad {
        return Some(None);
    }
    // The input gradient is a convolution of the padded output gradient with the
    // spatially flipped, channel-transposed kernel.
    let mut flipped = vec![0.0f32; weights.len()];
    for o in 0..cout {
        for ci in 0..cin {
            for t in 0..9 {
                flipped[(ci * cout + o) * 9 + 8 - t] = weights[(o * cin + ci) * 9 + t];
            }
        }
    }
    let dp = pad1(d_out, cout, h, w);
    let adjoint = Conv3 { x: &dp, cin: cout, h, w, weights: &flipped, cout: cin };
    let mut dx = FeatureMap::<T>::zeros(cin, h, w);
    simd::conv3_forward(&adjoint, None, as_f32_mut(dx.data_mut())?);
    Some(Some(dx))
}

pub(crate) fn conv_forward<T: Scalar>(
    spec: &ConvSpec,
    params: &[T],
    x: &FeatureMap<T>,
    scratch: &mut Vec<T>,
) -> FeatureMap<T> {
    assert_eq!(x.channels(), spec.cin, "{}: input channels", spec.name);
    if let Some(out) = conv3_forward_fast(spec, params, x) {
        return out;
    }
    let (_, h, w) = x.shape();
    let hw = h * w;
    let kk = spec.fan_in();
    let weights = View::n(&params[spec.w_off..][..spec.n_weights()], kk);
    let bias = &params[spec.b_off..][..spec.cout];
    let mut out = FeatureMap::zeros(spec.cout, h, w);
    for (plane, &b) in out.data_mut().chunks_exact_mut(hw).zip(bias) {
        plane.fill(b);
    }
    if spec.k == 1 {
        gemm(spec.cout, kk, hw, weights, View::n(x.data(), hw), T::one(), out.data_mut(), hw);
        return out;
    }
    let rows = band_rows(kk, w, h);
    for y0 in (0..h).step_by(rows) {
        let y1 = (y0 + rows).min(h);
        let npx = (y1 - y0) * w;
        im2col_rows(x, spec.k, y0, y1, scratch);
        gemm(
            spec.cout,
            kk,
            npx,
            weights,
            View::n(scratch, npx),
            T::one(),
            &mut out.data_mut()[y0 * w..],
            hw,
        );
    }
    out
}

/// Adds weight and bias gradients into `grad`; returns the input gradient if requested.
pub(crate) fn conv_backward<T: Scalar>(
    spec: &ConvSpec,
    params: &[T],
    x: &FeatureMap<T>,
    d_out: &FeatureMap<T>,
    grad: &mut [T],
    want_input_grad: bool,
    scratch: &mut Vec<T>,
) -> Option<FeatureMap<T>> {
    let (_, h, w) = x.shape();
    let hw = h * w;
    let kk = spec.fan_in();
    assert_eq!(d_out.shape(), (spec.cout, h, w));
    if let Some(dx) = conv3_backward_fast(spec, params, x, d_out, grad, want_input_grad) {
        return dx;
    }
    for (o, plane) in d_out.data().chunks_exact(hw).enumerate() {
        let g = &mut grad[spec.b_off + o];
        *g = *g + plane.iter().copied().sum::<T>();
    }
    let weights = &params[spec.w_off..][..spec.n_weights()];
    let (w_off, n_w) = (spec.w_off, spec.n_weights());
    if spec.k == 1 {
        gemm(
            spec.cout,
            hw,
            kk,
            View::n(d_out.data(), hw),
            View::t(x.data(), hw),
            T::one(),
            &mut grad[w_off..][..n_w],
            kk,
        );
        if !want_input_grad {
            return None;
        }
        let mut dx = FeatureMap::zeros(spec.cin, h, w);
        gemm(
            kk,
            spec.cout,
            hw,
            View::t(weights, kk),
            View::n(d_out.data(), hw),
            T::zero(),
            dx.data_mut(),
            hw,
        );
        return Some(dx);
    }
    let mut dx = want_input_grad.then(|| FeatureMap::zeros(spec.cin, h, w));
    let mut d_col = Vec::new();
    let rows = band_rows(kk, w, h);
    for y0 in (0..h).step_by(rows) {
        let y1 = (y0 + rows).min(h);
        let npx = (y1 - y0) * w;
        let d_band = View::n(&d_out.data()[y0 * w..], hw);
        im2col_rows(x, spec.k, y0, y1, scratch);
        gemm(
            spec.cout,
            npx,
            kk,
            d_band,
            View::t(scratch, npx),
            T::one(),
            &mut grad[w_off..][..n_w],
            kk,
        );
        if let Some(dx) = dx.as_mut() {
            d_col.resize(kk * npx, T::zero());
            gemm(kk, spec.cout, npx, View::t(weights, kk), d_band, T::zero(), &mut d_col, npx);
            col2im_rows(&d_col, spec.k, y0, y1, dx);
        }
    }
    dx
}

pub(crate) fn leaky_relu<T: Scalar>(x: &mut FeatureMap<T>) {
    let slope = T::of(LEAKY_SLOPE);
    for v in x.data_mut() {
        if *v <= T::zero() {
            *v = *v * slope;
        }
    }
}

/// Scales `grad` by the LeakyReLU derivative, read off the activation's sign.
pub(crate) fn leaky_relu_backward<T: Scalar>(out: &FeatureMap<T>, grad: &mut FeatureMap<T>) {
    let slope = T::of(LEAKY_SLOPE);
    for (g, &a) in grad.data_mut().iter_mut().zip(out.data()) {
        if a <= T::zero() {
            *g = *g * slope;
        }
    }
}

/// 2x2 max-pool with stride 2; also returns the flat input index of every maximum.
pub(crate) fn max_pool<T: Scalar>(x: &FeatureMap<T>) -> (FeatureMap<T>, Vec<u32>) {
    let (c, h, w) = x.shape();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = FeatureMap::zeros(c, oh, ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    let src = x.data();
    let dst = out.data_mut();
    let mut o = 0;
    for ci in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let base = (ci * h + 2 * y) * w + 2 * xx;
                let mut best = base;
                for idx in [base + 1, base + w, base + w + 1] {
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                dst[o] = src[best];
                arg.push(best as u32);
                o += 1;
            }
        }
    }
    (out, arg)
}

pub(crate) fn max_pool_backward<T: Scalar>(
    d_out: &FeatureMap<T>,
    arg: &[u32],
    input_shape: (usize, usize, usize),
) -> FeatureMap<T> {
    let (c, h, w) = input_shape;
    let mut dx = FeatureMap::zeros(c, h, w);
    let data = dx.data_mut();
    for (&g, &i) in d_out.data().iter().zip(arg) {
        data[i as usize] = data[i as usize] + g;
    }
    dx
}

pub(crate) fn upsample<T: Scalar>(x: &FeatureMap<T>) -> FeatureMap<T> {
    let (c, h, w) = x.shape();
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = FeatureMap::zeros(c, oh, ow);
    let src = x.data();
    let dst = out.data_mut();
    for ci in 0..c {
        for y in 0..oh {
            let s = &src[(ci * h + y / 2) * w..][..w];
            let d = &mut dst[(ci * oh + y) * ow..][..ow];
            for (xx, v) in d.iter_mut().enumerate() {
                *v = s[xx / 2];
            }
        }
    }
    out
}

pub(crate) fn upsample_backward<T: Scalar>(d_out: &FeatureMap<T>) -> FeatureMap<T> {
    let (c, oh, ow) = d_out.shape();
    let (h, w) = (oh / 2, ow / 2);
    let mut dx = FeatureMap::zeros(c, h, w);
    let src = d_out.data();
    let dst = dx.data_mut();
    for ci in 0..c {
        for y in 0..oh {
            let s = &src[(ci * oh + y) * ow..][..ow];
            let d = &mut dst[(ci * h + y / 2) * w..][..w];
            for (xx, &g) in s.iter().enumerate() {
                d[xx / 2] = d[xx / 2] + g;
            }
        }
    }
    dx
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
