//! Direct 3x3 convolution kernels for `f32` on x86-64 with AVX2 and FMA.
//!
//! Inputs are zero-padded planes (one pixel on each side) so every tap is a
//! plain offset. Output channels are processed four at a time and pixels
//! sixteen at a time; callers check [`supported`] and otherwise use the
//! generic path.

/// A padded 3x3 convolution problem.
pub(crate) struct Conv3<'a, T> {
    /// `cin` padded planes of `(h + 2) * (w + 2)` elements each.
    pub x: &'a [T],
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    /// `cout x cin x 3 x 3`, row-major.
    pub weights: &'a [T],
    pub cout: usize,
}

impl<T> Conv3<'_, T> {
    pub fn pw(&self) -> usize {
        self.w + 2
    }

    pub fn plane(&self) -> usize {
        (self.h + 2) * self.pw()
    }

    fn check(&self) {
        assert!(supported(self.w, self.cout), "unsupported direct-conv shape");
        assert!(self.x.len() >= self.cin * self.plane(), "padded input too short");
        assert!(self.weights.len() >= self.cout * self.cin * 9, "weights too short");
    }
}

/// Whether the direct kernels handle an output of width `w` with `cout` channels here.
pub(crate) fn supported(w: usize, cout: usize) -> bool {
    w % 16 == 0 && cout % 4 == 0 && has_avx2_fma()
}

#[cfg(target_arch = "x86_64")]
fn has_avx2_fma() -> bool {
    use std::sync::OnceLock;
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma"))
}

#[cfg(not(target_arch = "x86_64"))]
fn has_avx2_fma() -> bool {
    false
}

/// `out[o] (h x w) = bias[o] + conv(x, weights)`.
///
/// # Panics
/// If [`supported`] rejects the shape or a buffer is too short.
pub(crate) fn conv3_forward(p: &Conv3<'_, f32>, bias: Option<&[f32]>, out: &mut [f32]) {
    p.check();
    assert!(bias.map_or(true, |b| b.len() >= p.cout));
    assert!(out.len() >= p.cout * p.h * p.w);
    #[cfg(target_arch = "x86_64")]
    // SAFETY: AVX2 and FMA were detected at runtime and the buffer sizes checked above.
    unsafe {
        avx::forward(p, bias, out)
    };
}

/// `d_w += d_out (x) x` summed over all pixels.
///
/// # Panics
/// As [`conv3_forward`].
pub(crate) fn conv3_weight_grad(p: &Conv3<'_, f32>, d_out: &[f32], d_w: &mut [f32]) {
    p.check();
    assert!(d_out.len() >= p.cout * p.h * p.w);
    assert!(d_w.len() >= p.cout * p.cin * 9);
    #[cfg(target_arch = "x86_64")]
    // SAFETY: as above.
    unsafe {
        avx::weight_grad(p, d_out, d_w)
    };
}

#[cfg(target_arch = "x86_64")]
mod avx {
    use super::Conv3;
    use std::arch::x86_64::*;

    const OB: usize = 4;

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn forward(p: &Conv3<'_, f32>, bias: Option<&[f32]>, out: &mut [f32]) {
        let (h, w, pw, plane, kk) = (p.h, p.w, p.pw(), p.plane(), p.cin * 9);
        let xs = p.x.as_ptr();
        let ws = p.weights.as_ptr();
        let os = out.as_mut_ptr();
        for ob in (0..p.cout).step_by(OB) {
            let b: [f32; OB] = std::array::from_fn(|o| bias.map_or(0.0, |b| b[ob + o]));
            for y in 0..h {
                for x0 in (0..w).step_by(16) {
                    let mut acc = [[_mm256_setzero_ps(); 2]; OB];
                    for (o, a) in acc.iter_mut().enumerate() {
                        a[0] = _mm256_set1_ps(b[o]);
                        a[1] = a[0];
                    }
                    for ci in 0..p.cin {
                        for ky in 0..3 {
                            let row = xs.add(ci * plane + (y + ky) * pw + x0);
                            for kx in 0..3 {
                                let s0 = _mm256_loadu_ps(row.add(kx));
                                let s1 = _mm256_loadu_ps(row.add(kx + 8));
                                let tap = ci * 9 + ky * 3 + kx;
                                for (o, a) in acc.iter_mut().enumerate() {
                                    let wv = _mm256_broadcast_ss(&*ws.add((ob + o) * kk + tap));
                                    a[0] = _mm256_fmadd_ps(wv, s0, a[0]);
                                    a[1] = _mm256_fmadd_ps(wv, s1, a[1]);
                                }
                            }
                        }
                    }
                    for (o, a) in acc.iter().enumerate() {
                        let dst = os.add((ob + o) * h * w + y * w + x0);
                        _mm256_storeu_ps(dst, a[0]);
                        _mm256_storeu_ps(dst.add(8), a[1]);
                    }
                }
            }
        }
    }

    #[target_feature(enable = "avx2,fma")]
    unsafe fn hsum(v: __m256) -> f32 {
        let mut lanes = [0.0f32; 8];
        _mm256_storeu_ps(lanes.as_mut_ptr(), v);
        let pairs = [
            lanes[0] + lanes[4],
            lanes[1] + lanes[5],
            lanes[2] + lanes[6],
            lanes[3] + lanes[7],
        ];
        (pairs[0] + pairs[2]) + (pairs[1] + pairs[3])
    }

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn weight_grad(p: &Conv3<'_, f32>, d_out: &[f32], d_w: &mut [f32]) {
        let (h, w, pw, plane, kk) = (p.h, p.w, p.pw(), p.plane(), p.cin * 9);
        let hw = h * w;
        let xs = p.x.as_ptr();
        let ds = d_out.as_ptr();
        for ob in (0..p.cout).step_by(OB) {
            for ci in 0..p.cin {
                for ky in 0..3 {
                    let mut acc = [[_mm256_setzero_ps(); 3]; OB];
                    for y in 0..h {
                        let row = xs.add(ci * plane + (y + ky) * pw);
                        let drow = ds.add(ob * hw + y * w);
                        for x0 in (0..w).step_by(8) {
                            let s = [
                                _mm256_loadu_ps(row.add(x0)),
                                _mm256_loadu_ps(row.add(x0 + 1)),
                                _mm256_loadu_ps(row.add(x0 + 2)),
                            ];
                            for (o, a) in acc.iter_mut().enumerate() {
                                let d = _mm256_loadu_ps(drow.add(o * hw + x0));
                                for kx in 0..3 {
                                    a[kx] = _mm256_fmadd_ps(d, s[kx], a[kx]);
                                }
                            }
                        }
                    }
                    for (o, a) in acc.iter().enumerate() {
                        for (kx, &v) in a.iter().enumerate() {
                            d_w[(ob + o) * kk + ci * 9 + ky * 3 + kx] += hsum(v);
                        }
                    }
                }
            }
        }
    }
}
