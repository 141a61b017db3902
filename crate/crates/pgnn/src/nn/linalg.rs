//! Matrix kernels and image-to-column lowering for the convolution layers.
//!
//! Loop orders keep the innermost dimension contiguous so the compiler can
//! vectorize; convolution cost dominates the benchmark harness runtime.

use super::Scalar;

/// `c[m x n] += a[m x k] * b[k x n]`, all row-major.
///
/// Rows of `a` are processed four at a time so each streamed row of `b`
/// feeds four accumulator rows; accumulation order per output element is
/// fixed, so results are bit-deterministic.
pub fn matmul<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let mut i = 0;
    while i + 4 <= m {
        let (c01, c23) = c[i * n..(i + 4) * n].split_at_mut(2 * n);
        let (c0, c1) = c01.split_at_mut(n);
        let (c2, c3) = c23.split_at_mut(n);
        for kk in 0..k {
            let a0 = a[i * k + kk];
            let a1 = a[(i + 1) * k + kk];
            let a2 = a[(i + 2) * k + kk];
            let a3 = a[(i + 3) * k + kk];
            let b_row = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                let bj = b_row[j];
                c0[j] += a0 * bj;
                c1[j] += a1 * bj;
                c2[j] += a2 * bj;
                c3[j] += a3 * bj;
            }
        }
        i += 4;
    }
    while i < m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            let b_row = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                c_row[j] += aik * b_row[j];
            }
        }
        i += 1;
    }
}

/// Dot product with eight independent accumulator lanes (a fixed reduction
/// tree the compiler can vectorize; plain sequential reduction cannot be).
#[inline]
fn dot_lanes<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [S::ZERO; 8];
    let chunks = a.len() / 8 * 8;
    let mut i = 0;
    while i < chunks {
        for l in 0..8 {
            acc[l] += a[i + l] * b[i + l];
        }
        i += 8;
    }
    let mut tail = S::ZERO;
    for j in chunks..a.len() {
        tail += a[j] * b[j];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `c[m x n] += a[m x k] * b^T` where `b` is `n x k` row-major.
pub fn matmul_nt<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            c[i * n + j] += dot_lanes(a_row, b_row);
        }
    }
}

/// `c[m x n] += a^T * b` where `a` is `k x m` and `b` is `k x n`, row-major.
pub fn matmul_tn<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for kk in 0..k {
        let a_row = &a[kk * m..(kk + 1) * m];
        let b_row = &b[kk * n..(kk + 1) * n];
        for i in 0..m {
            let aki = a_row[i];
            let c_row = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                c_row[j] += aki * b_row[j];
            }
        }
    }
}

/// Geometry of one conv application.
#[derive(Debug, Clone, Copy)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        padding: usize,
    ) -> Option<Self> {
        let eff_h = height + 2 * padding;
        let eff_w = width + 2 * padding;
        if eff_h < kh || eff_w < kw || stride == 0 {
            return None;
        }
        Some(ConvGeom {
            channels,
            height,
            width,
            kh,
            kw,
            stride,
            padding,
            out_h: (eff_h - kh) / stride + 1,
            out_w: (eff_w - kw) / stride + 1,
        })
    }

    pub fn patch_len(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn out_len(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Lowers one sample to columns: `cols[patch_len x out_len]`, zero padding.
pub fn im2col<S: Scalar>(x: &[S], g: &ConvGeom, cols: &mut [S]) {
    debug_assert_eq!(x.len(), g.channels * g.height * g.width);
    debug_assert_eq!(cols.len(), g.patch_len() * g.out_len());
    let out_len = g.out_len();
    let mut row = 0;
    for c in 0..g.channels {
        let x_c = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let dst = &mut cols[row * out_len..(row + 1) * out_len];
                let mut p = 0;
                for oh in 0..g.out_h {
                    let ih = (oh * g.stride + ki) as isize - g.padding as isize;
                    if ih < 0 || ih >= g.height as isize {
                        dst[p..p + g.out_w].fill(S::ZERO);
                        p += g.out_w;
                        continue;
                    }
                    let x_row = &x_c[ih as usize * g.width..(ih as usize + 1) * g.width];
                    for ow in 0..g.out_w {
                        let iw = (ow * g.stride + kj) as isize - g.padding as isize;
                        dst[p] = if iw < 0 || iw >= g.width as isize {
                            S::ZERO
                        } else {
                            x_row[iw as usize]
                        };
                        p += 1;
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-accumulates columns back onto the sample.
pub fn col2im_accumulate<S: Scalar>(cols: &[S], g: &ConvGeom, x: &mut [S]) {
    debug_assert_eq!(x.len(), g.channels * g.height * g.width);
    debug_assert_eq!(cols.len(), g.patch_len() * g.out_len());
    let out_len = g.out_len();
    let mut row = 0;
    for c in 0..g.channels {
        let base = c * g.height * g.width;
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let src = &cols[row * out_len..(row + 1) * out_len];
                let mut p = 0;
                for oh in 0..g.out_h {
                    let ih = (oh * g.stride + ki) as isize - g.padding as isize;
                    if ih < 0 || ih >= g.height as isize {
                        p += g.out_w;
                        continue;
                    }
                    for ow in 0..g.out_w {
                        let iw = (ow * g.stride + kj) as isize - g.padding as isize;
                        if iw >= 0 && iw < g.width as isize {
                            x[base + ih as usize * g.width + iw as usize] += src[p];
                        }
                        p += 1;
                    }
                }
                row += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small_case() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        matmul(&a, &b, &mut c, 2, 2, 2);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transposed_variants_agree_with_plain() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(3, 0);
        let (m, k, n) = (5, 7, 4);
        let a: Vec<f64> = (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..k * n).map(|_| rng.random_range(-1.0..1.0)).collect();

        let mut c_ref = vec![0.0; m * n];
        matmul(&a, &b, &mut c_ref, m, k, n);

        // b stored transposed, multiplied via matmul_nt.
        let mut b_t = vec![0.0; n * k];
        for i in 0..k {
            for j in 0..n {
                b_t[j * k + i] = b[i * n + j];
            }
        }
        let mut c_nt = vec![0.0; m * n];
        matmul_nt(&a, &b_t, &mut c_nt, m, k, n);

        // a stored transposed, multiplied via matmul_tn.
        let mut a_t = vec![0.0; k * m];
        for i in 0..m {
            for j in 0..k {
                a_t[j * m + i] = a[i * k + j];
            }
        }
        let mut c_tn = vec![0.0; m * n];
        matmul_tn(&a_t, &b, &mut c_tn, m, k, n);

        for i in 0..m * n {
            assert!((c_ref[i] - c_nt[i]).abs() < 1e-12);
            assert!((c_ref[i] - c_tn[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        // <im2col(x), y> == <x, col2im(y)> for random x, y.
        use rand::Rng;
        let mut rng = crate::rng::seeded(4, 0);
        let g = ConvGeom::new(2, 5, 6, 3, 3, 2, 1).unwrap();
        let x: Vec<f64> = (0..2 * 5 * 6)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let y: Vec<f64> = (0..g.patch_len() * g.out_len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let mut cols = vec![0.0; y.len()];
        im2col(&x, &g, &mut cols);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; x.len()];
        col2im_accumulate(&y, &g, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
