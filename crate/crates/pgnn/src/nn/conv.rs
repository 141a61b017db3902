//! Convolution layers with cross-correlation semantics.
//!
//! The 3x3 / stride-1 / padding-1 case — nearly all of the networks'
//! compute — runs through direct shifted-plane kernels; every other
//! geometry lowers to columns and matrix products.

use super::linalg::{col2im_accumulate, im2col, matmul, matmul_nt, matmul_tn, ConvGeom};
use super::{Mode, Module, Param, ParamVisit, Scalar, Tensor4};
use crate::error::{Error, Result};
use crate::rng::Prng;

/// One fused pass of a full 3x3 stencil: `dst += stencil(w9) applied to
/// src`, zero padding of one pixel. `w9` is row-major `[ki][kj]`.
#[inline]
fn fused3x3_plane<S: Scalar>(dst: &mut [S], src: &[S], h: usize, w: usize, w9: &[S; 9]) {
    debug_assert!(h >= 2 && w >= 2);
    for i in 0..h {
        let up = if i > 0 { &src[(i - 1) * w..i * w] } else { &[] };
        let mid = &src[i * w..(i + 1) * w];
        let down = if i + 1 < h {
            &src[(i + 1) * w..(i + 2) * w]
        } else {
            &[]
        };
        let dst_row = &mut dst[i * w..(i + 1) * w];
        // Interior columns: all nine taps, one pass, vectorizable.
        match (up.is_empty(), down.is_empty()) {
            (false, false) => {
                for j in 1..w - 1 {
                    dst_row[j] += w9[0] * up[j - 1]
                        + w9[1] * up[j]
                        + w9[2] * up[j + 1]
                        + w9[3] * mid[j - 1]
                        + w9[4] * mid[j]
                        + w9[5] * mid[j + 1]
                        + w9[6] * down[j - 1]
                        + w9[7] * down[j]
                        + w9[8] * down[j + 1];
                }
            }
            (true, false) => {
                for j in 1..w - 1 {
                    dst_row[j] += w9[3] * mid[j - 1]
                        + w9[4] * mid[j]
                        + w9[5] * mid[j + 1]
                        + w9[6] * down[j - 1]
                        + w9[7] * down[j]
                        + w9[8] * down[j + 1];
                }
            }
            (false, true) => {
                for j in 1..w - 1 {
                    dst_row[j] += w9[0] * up[j - 1]
                        + w9[1] * up[j]
                        + w9[2] * up[j + 1]
                        + w9[3] * mid[j - 1]
                        + w9[4] * mid[j]
                        + w9[5] * mid[j + 1];
                }
            }
            (true, true) => {
                for j in 1..w - 1 {
                    dst_row[j] += w9[3] * mid[j - 1] + w9[4] * mid[j] + w9[5] * mid[j + 1];
                }
            }
        }
        // Edge columns.
        let mut left = w9[4] * mid[0] + w9[5] * mid[1];
        let mut right = w9[3] * mid[w - 2] + w9[4] * mid[w - 1];
        if !up.is_empty() {
            left += w9[1] * up[0] + w9[2] * up[1];
            right += w9[0] * up[w - 2] + w9[1] * up[w - 1];
        }
        if !down.is_empty() {
            left += w9[7] * down[0] + w9[8] * down[1];
            right += w9[6] * down[w - 2] + w9[7] * down[w - 1];
        }
        dst_row[0] += left;
        dst_row[w - 1] += right;
    }
}

/// All nine weight-gradient dots of a 3x3 stencil in one pass:
/// `result[3*ki+kj] = sum over valid (i,j) of gout[i][j] * x[i+ki-1][j+kj-1]`.
///
/// Out-of-range rows contribute through an explicit zero row, so the loop
/// body is branch-free; each of the nine sums carries eight lanes for a
/// fixed, vectorizable reduction order.
fn fused3x3_dots<S: Scalar>(gout: &[S], x: &[S], h: usize, w: usize, zeros: &[S]) -> [S; 9] {
    debug_assert!(w >= 2 && zeros.len() >= w);
    let mut acc = [[S::ZERO; 8]; 9];
    let mut tail = [S::ZERO; 9];
    for i in 0..h {
        let g_row = &gout[i * w..(i + 1) * w];
        let rows: [&[S]; 3] = [
            if i > 0 {
                &x[(i - 1) * w..i * w]
            } else {
                &zeros[..w]
            },
            &x[i * w..(i + 1) * w],
            if i + 1 < h {
                &x[(i + 1) * w..(i + 2) * w]
            } else {
                &zeros[..w]
            },
        ];
        // Column edges: j = 0 lacks the kj = 0 tap, j = w-1 lacks kj = 2.
        for (ki, r) in rows.iter().enumerate() {
            tail[3 * ki + 1] += g_row[0] * r[0];
            tail[3 * ki + 2] += g_row[0] * r[1];
            tail[3 * ki] += g_row[w - 1] * r[w - 2];
            tail[3 * ki + 1] += g_row[w - 1] * r[w - 1];
        }
        // Interior columns, eight at a time; fixed-length windows hoist the
        // bounds checks out of the lane loop.
        let mut j = 1;
        while j + 8 < w {
            let g: &[S] = &g_row[j..j + 8];
            for (ki, r) in rows.iter().enumerate() {
                let win: &[S] = &r[j - 1..j + 9];
                let a = &mut acc[3 * ki..3 * ki + 3];
                for l in 0..8 {
                    a[0][l] += g[l] * win[l];
                    a[1][l] += g[l] * win[l + 1];
                    a[2][l] += g[l] * win[l + 2];
                }
            }
            j += 8;
        }
        while j < w - 1 {
            let g = g_row[j];
            for (ki, r) in rows.iter().enumerate() {
                tail[3 * ki] += g * r[j - 1];
                tail[3 * ki + 1] += g * r[j];
                tail[3 * ki + 2] += g * r[j + 1];
            }
            j += 1;
        }
    }
    let mut out = [S::ZERO; 9];
    for t in 0..9 {
        let a = acc[t];
        out[t] = ((a[0] + a[1]) + (a[2] + a[3])) + ((a[4] + a[5]) + (a[6] + a[7])) + tail[t];
    }
    out
}

/// 2-D convolution. Weight layout `[out_c, in_c, kh, kw]`.
#[derive(Debug, Clone)]
pub struct Conv2d<S> {
    in_c: usize,
    out_c: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    pub weight: Param<S>,
    pub bias: Param<S>,
    cached_input: Option<Tensor4<S>>,
    // Test hook for the verification suite's fault-injection check: scales
    // one weight-gradient element in backward.
    #[doc(hidden)]
    pub backward_fault: Option<f64>,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut Prng,
    ) -> Self {
        assert!(stride >= 1, "stride must be >= 1");
        let fan_in = in_c * kernel * kernel;
        Conv2d {
            in_c,
            out_c,
            kernel,
            stride,
            padding,
            weight: Param::he_uniform(&[out_c, in_c, kernel, kernel], fan_in, rng),
            bias: Param::zeros(&[out_c]),
            cached_input: None,
            backward_fault: None,
        }
    }

    fn geom(&self, x: &Tensor4<S>) -> Result<ConvGeom> {
        if x.channels() != self.in_c {
            return Err(Error::dim(format!(
                "conv2d expects {} input channels, got {}",
                self.in_c,
                x.channels()
            )));
        }
        ConvGeom::new(
            self.in_c,
            x.height(),
            x.width(),
            self.kernel,
            self.kernel,
            self.stride,
            self.padding,
        )
        .ok_or_else(|| {
            Error::dim(format!(
                "conv2d kernel {}x{} does not fit input {}x{} with padding {}",
                self.kernel,
                self.kernel,
                x.height(),
                x.width(),
                self.padding
            ))
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_c
    }

    #[inline]
    fn direct3x3(&self) -> bool {
        self.kernel == 3 && self.stride == 1 && self.padding == 1
    }
}

impl<S: Scalar> Module<S> for Conv2d<S> {
    fn forward(&mut self, x: &Tensor4<S>, _mode: Mode) -> Result<Tensor4<S>> {
        let g = self.geom(x)?;
        let n = x.batch();
        let mut out = Tensor4::zeros([n, self.out_c, g.out_h, g.out_w]);
        if self.direct3x3() {
            let (h, w) = (x.height(), x.width());
            let plane = h * w;
            for s in 0..n {
                let xs = x.sample(s);
                let out_s = out.sample_mut(s);
                for oc in 0..self.out_c {
                    out_s[oc * plane..(oc + 1) * plane].fill(self.bias.value[oc]);
                }
                for ic in 0..self.in_c {
                    let src = &xs[ic * plane..(ic + 1) * plane];
                    for oc in 0..self.out_c {
                        let dst = &mut out_s[oc * plane..(oc + 1) * plane];
                        let base = (oc * self.in_c + ic) * 9;
                        let w9: [S; 9] = self.weight.value[base..base + 9]
                            .try_into()
                            .expect("3x3 kernel");
                        fused3x3_plane(dst, src, h, w, &w9);
                    }
                }
            }
        } else {
            let mut cols = vec![S::ZERO; g.patch_len() * g.out_len()];
            for s in 0..n {
                im2col(x.sample(s), &g, &mut cols);
                let out_s = out.sample_mut(s);
                matmul(
                    &self.weight.value,
                    &cols,
                    out_s,
                    self.out_c,
                    g.patch_len(),
                    g.out_len(),
                );
                for oc in 0..self.out_c {
                    let b = self.bias.value[oc];
                    for v in &mut out_s[oc * g.out_len()..(oc + 1) * g.out_len()] {
                        *v += b;
                    }
                }
            }
        }
        self.cached_input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let x = self
            .cached_input
            .take()
            .expect("conv2d backward before forward");
        let g = self.geom(&x).expect("cached input revalidates");
        let n = x.batch();
        debug_assert_eq!(grad_out.dims(), [n, self.out_c, g.out_h, g.out_w]);

        let mut grad_in = Tensor4::zeros(x.dims());
        let out_plane = g.out_len();
        // Bias gradient: channel sums of dOut.
        for s in 0..n {
            let go = grad_out.sample(s);
            for oc in 0..self.out_c {
                let mut acc = S::ZERO;
                for &v in &go[oc * out_plane..(oc + 1) * out_plane] {
                    acc += v;
                }
                self.bias.grad[oc] += acc;
            }
        }

        if self.direct3x3() {
            let (h, w) = (x.height(), x.width());
            let plane = h * w;
            let zeros = vec![S::ZERO; w];
            for s in 0..n {
                let xs = x.sample(s);
                let go = grad_out.sample(s);
                let gi = grad_in.sample_mut(s);
                for ic in 0..self.in_c {
                    let src = &xs[ic * plane..(ic + 1) * plane];
                    let gdst = &mut gi[ic * plane..(ic + 1) * plane];
                    for oc in 0..self.out_c {
                        let gout_plane = &go[oc * plane..(oc + 1) * plane];
                        // dW[oc,ic,ki,kj] += <gout, shift(x)>
                        let dots = fused3x3_dots(gout_plane, src, h, w, &zeros);
                        let base = (oc * self.in_c + ic) * 9;
                        for (t, d) in dots.into_iter().enumerate() {
                            self.weight.grad[base + t] += d;
                        }
                        // dX += conv(gout, rot180(w)): one fused pass.
                        let wk = &self.weight.value[base..base + 9];
                        let w9_flipped: [S; 9] = [
                            wk[8], wk[7], wk[6], wk[5], wk[4], wk[3], wk[2], wk[1], wk[0],
                        ];
                        fused3x3_plane(gdst, gout_plane, h, w, &w9_flipped);
                    }
                }
            }
        } else {
            let mut cols = vec![S::ZERO; g.patch_len() * g.out_len()];
            let mut dcols = vec![S::ZERO; g.patch_len() * g.out_len()];
            for s in 0..n {
                let go = grad_out.sample(s);
                // Weight gradient: dW += dOut * cols^T.
                im2col(x.sample(s), &g, &mut cols);
                matmul_nt(
                    go,
                    &cols,
                    &mut self.weight.grad,
                    self.out_c,
                    g.out_len(),
                    g.patch_len(),
                );
                // Input gradient: dcols = W^T * dOut, scattered back.
                dcols.fill(S::ZERO);
                matmul_tn(
                    &self.weight.value,
                    go,
                    &mut dcols,
                    g.patch_len(),
                    self.out_c,
                    g.out_len(),
                );
                col2im_accumulate(&dcols, &g, grad_in.sample_mut(s));
            }
        }
        if let Some(scale) = self.backward_fault {
            self.weight.grad[0] = S::from_f64(self.weight.grad[0].to_f64() * scale + 1e-3);
        }
        grad_in
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        f(self.weight.visit(format!("{prefix}weight")));
        f(self.bias.visit(format!("{prefix}bias")));
    }
}

/// Transposed 2-D convolution (the adjoint of [`Conv2d`] with the same
/// geometry). Weight layout `[in_c, out_c, kh, kw]`; output size
/// `(h - 1) * stride - 2 * padding + kernel`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<S> {
    in_c: usize,
    out_c: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    pub weight: Param<S>,
    pub bias: Param<S>,
    cached_input: Option<Tensor4<S>>,
}

impl<S: Scalar> ConvTranspose2d<S> {
    pub fn new(
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut Prng,
    ) -> Self {
        assert!(stride >= 1, "stride must be >= 1");
        let fan_in = in_c * kernel * kernel;
        ConvTranspose2d {
            in_c,
            out_c,
            kernel,
            stride,
            padding,
            weight: Param::he_uniform(&[in_c, out_c, kernel, kernel], fan_in, rng),
            bias: Param::zeros(&[out_c]),
            cached_input: None,
        }
    }

    fn out_hw(&self, x: &Tensor4<S>) -> Result<(usize, usize)> {
        if x.channels() != self.in_c {
            return Err(Error::dim(format!(
                "conv_transpose2d expects {} input channels, got {}",
                self.in_c,
                x.channels()
            )));
        }
        let oh = (x.height() - 1) * self.stride + self.kernel;
        let ow = (x.width() - 1) * self.stride + self.kernel;
        if oh < 2 * self.padding + 1 || ow < 2 * self.padding + 1 {
            return Err(Error::dim("conv_transpose2d output collapses to nothing"));
        }
        Ok((oh - 2 * self.padding, ow - 2 * self.padding))
    }

    /// Geometry over the *output* tensor: the transposed conv scatters into
    /// its output exactly where a plain conv over that output would read.
    /// `(oh + 2p - k)` is always divisible by the stride, so the geometry's
    /// derived extent equals the input extent.
    fn out_geom(&self, x: &Tensor4<S>) -> Result<ConvGeom> {
        let (oh, ow) = self.out_hw(x)?;
        let g = ConvGeom::new(
            self.out_c,
            oh,
            ow,
            self.kernel,
            self.kernel,
            self.stride,
            self.padding,
        )
        .ok_or_else(|| Error::dim("conv_transpose2d output geometry is degenerate"))?;
        debug_assert_eq!((g.out_h, g.out_w), (x.height(), x.width()));
        Ok(g)
    }
}

impl<S: Scalar> Module<S> for ConvTranspose2d<S> {
    fn forward(&mut self, x: &Tensor4<S>, _mode: Mode) -> Result<Tensor4<S>> {
        let g = self.out_geom(x)?;
        let n = x.batch();
        let in_len = x.height() * x.width();
        let mut out = Tensor4::zeros([n, self.out_c, g.height, g.width]);
        let mut dcols = vec![S::ZERO; g.patch_len() * in_len];
        for s in 0..n {
            let out_s = out.sample_mut(s);
            for oc in 0..self.out_c {
                let b = self.bias.value[oc];
                out_s[oc * g.height * g.width..(oc + 1) * g.height * g.width].fill(b);
            }
            // cols = W^T * x, scattered onto the output plane.
            dcols.fill(S::ZERO);
            matmul_tn(
                &self.weight.value,
                x.sample(s),
                &mut dcols,
                g.patch_len(),
                self.in_c,
                in_len,
            );
            col2im_accumulate(&dcols, &g, out_s);
        }
        self.cached_input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let x = self
            .cached_input
            .take()
            .expect("conv_transpose2d backward before forward");
        let g = self.out_geom(&x).expect("cached input revalidates");
        let n = x.batch();
        let in_len = x.height() * x.width();
        let out_plane = g.height * g.width;
        let mut grad_in = Tensor4::zeros(x.dims());
        let mut cols = vec![S::ZERO; g.patch_len() * in_len];
        for s in 0..n {
            let go = grad_out.sample(s);
            for oc in 0..self.out_c {
                let mut acc = S::ZERO;
                for &v in &go[oc * out_plane..(oc + 1) * out_plane] {
                    acc += v;
                }
                self.bias.grad[oc] += acc;
            }
            im2col(go, &g, &mut cols);
            // dX = W * cols; dW += x * cols^T.
            matmul(
                &self.weight.value,
                &cols,
                grad_in.sample_mut(s),
                self.in_c,
                g.patch_len(),
                in_len,
            );
            matmul_nt(
                x.sample(s),
                &cols,
                &mut self.weight.grad,
                self.in_c,
                in_len,
                g.patch_len(),
            );
        }
        grad_in
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        f(self.weight.visit(format!("{prefix}weight")));
        f(self.bias.visit(format!("{prefix}bias")));
    }
}
