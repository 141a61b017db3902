//! Linear, pooling, and reduction layers.

use super::linalg::{matmul, matmul_nt, matmul_tn};
use super::{Mode, Module, Param, ParamVisit, Scalar, Tensor4};
use crate::error::{Error, Result};
use crate::rng::Prng;

/// Fully connected layer on `[n, features, 1, 1]` tensors.
/// Weight layout `[out_features, in_features]`.
#[derive(Debug, Clone)]
pub struct Linear<S> {
    in_f: usize,
    out_f: usize,
    pub weight: Param<S>,
    pub bias: Param<S>,
    cached_input: Option<Tensor4<S>>,
}

impl<S: Scalar> Linear<S> {
    pub fn new(in_f: usize, out_f: usize, rng: &mut Prng) -> Self {
        Linear {
            in_f,
            out_f,
            weight: Param::he_uniform(&[out_f, in_f], in_f, rng),
            bias: Param::zeros(&[out_f]),
            cached_input: None,
        }
    }
}

impl<S: Scalar> Module<S> for Linear<S> {
    fn forward(&mut self, x: &Tensor4<S>, _mode: Mode) -> Result<Tensor4<S>> {
        if x.channels() != self.in_f || x.height() != 1 || x.width() != 1 {
            return Err(Error::dim(format!(
                "linear expects [n, {}, 1, 1], got {:?}",
                self.in_f,
                x.dims()
            )));
        }
        let n = x.batch();
        let mut out = Tensor4::zeros([n, self.out_f, 1, 1]);
        // out[n x out_f] = x[n x in_f] * W^T
        matmul_nt(
            x.data(),
            &self.weight.value,
            out.data_mut(),
            n,
            self.in_f,
            self.out_f,
        );
        for s in 0..n {
            for o in 0..self.out_f {
                let idx = out.idx(s, o, 0, 0);
                out.data_mut()[idx] += self.bias.value[o];
            }
        }
        self.cached_input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let x = self
            .cached_input
            .take()
            .expect("linear backward before forward");
        let n = x.batch();
        // dW += dOut^T[out_f x n] * x[n x in_f]
        matmul_tn(
            grad_out.data(),
            x.data(),
            &mut self.weight.grad,
            self.out_f,
            n,
            self.in_f,
        );
        for s in 0..n {
            for o in 0..self.out_f {
                self.bias.grad[o] += grad_out.at(s, o, 0, 0);
            }
        }
        // dX = dOut[n x out_f] * W[out_f x in_f]
        let mut grad_in = Tensor4::zeros(x.dims());
        matmul(
            grad_out.data(),
            &self.weight.value,
            grad_in.data_mut(),
            n,
            self.out_f,
            self.in_f,
        );
        grad_in
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        f(self.weight.visit(format!("{prefix}weight")));
        f(self.bias.visit(format!("{prefix}bias")));
    }
}

/// Reduces each channel's spatial extent to its mean: `[n,c,h,w] -> [n,c,1,1]`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    cached_dims: Option<[usize; 4]>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool { cached_dims: None }
    }
}

impl<S: Scalar> Module<S> for GlobalAvgPool {
    fn forward(&mut self, x: &Tensor4<S>, _mode: Mode) -> Result<Tensor4<S>> {
        let [n, c, h, w] = x.dims();
        let mut out = Tensor4::zeros([n, c, 1, 1]);
        let inv = S::from_f64(1.0 / (h * w) as f64);
        for s in 0..n {
            for ch in 0..c {
                let mut acc = S::ZERO;
                for i in 0..h {
                    for j in 0..w {
                        acc += x.at(s, ch, i, j);
                    }
                }
                out.set(s, ch, 0, 0, acc * inv);
            }
        }
        self.cached_dims = Some(x.dims());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let dims = self
            .cached_dims
            .take()
            .expect("pool backward before forward");
        let [n, c, h, w] = dims;
        let inv = S::from_f64(1.0 / (h * w) as f64);
        let mut grad_in = Tensor4::zeros(dims);
        for s in 0..n {
            for ch in 0..c {
                let g = grad_out.at(s, ch, 0, 0) * inv;
                for i in 0..h {
                    for j in 0..w {
                        grad_in.set(s, ch, i, j, g);
                    }
                }
            }
        }
        grad_in
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut dyn FnMut(ParamVisit<'_, S>)) {}
}

/// Max pooling; padded positions never win (padding is conceptual `-inf`).
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    kernel: usize,
    stride: usize,
    padding: usize,
    /// Flat input index of each output's argmax.
    argmax: Option<(Vec<usize>, [usize; 4])>,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        assert!(padding < kernel, "fully padded window would be empty");
        MaxPool2d {
            kernel,
            stride,
            padding,
            argmax: None,
        }
    }
}

impl<S: Scalar> Module<S> for MaxPool2d {
    fn forward(&mut self, x: &Tensor4<S>, _mode: Mode) -> Result<Tensor4<S>> {
        let [n, c, h, w] = x.dims();
        let eff_h = h + 2 * self.padding;
        let eff_w = w + 2 * self.padding;
        if eff_h < self.kernel || eff_w < self.kernel {
            return Err(Error::dim(format!(
                "maxpool kernel {} does not fit {h}x{w} with padding {}",
                self.kernel, self.padding
            )));
        }
        let oh = (eff_h - self.kernel) / self.stride + 1;
        let ow = (eff_w - self.kernel) / self.stride + 1;
        let mut out = Tensor4::zeros([n, c, oh, ow]);
        let mut argmax = vec![0usize; n * c * oh * ow];
        let mut pos = 0;
        for s in 0..n {
            for ch in 0..c {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut best: Option<(S, usize)> = None;
                        for ki in 0..self.kernel {
                            let ii = (i * self.stride + ki) as isize - self.padding as isize;
                            if ii < 0 || ii >= h as isize {
                                continue;
                            }
                            for kj in 0..self.kernel {
                                let jj = (j * self.stride + kj) as isize - self.padding as isize;
                                if jj < 0 || jj >= w as isize {
                                    continue;
                                }
                                let idx = x.idx(s, ch, ii as usize, jj as usize);
                                let v = x.data()[idx];
                                if best.is_none_or(|(bv, _)| v > bv) {
                                    best = Some((v, idx));
                                }
                            }
                        }
                        let (v, idx) = best.expect("window always has an in-bounds cell");
                        out.set(s, ch, i, j, v);
                        argmax[pos] = idx;
                        pos += 1;
                    }
                }
            }
        }
        self.argmax = Some((argmax, x.dims()));
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let (argmax, dims) = self.argmax.take().expect("maxpool backward before forward");
        let mut grad_in = Tensor4::zeros(dims);
        for (g, &idx) in grad_out.data().iter().zip(&argmax) {
            grad_in.data_mut()[idx] += *g;
        }
        grad_in
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut dyn FnMut(ParamVisit<'_, S>)) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn identity_linear_passes_input_through() {
        let mut lin: Linear<f64> = Linear::new(3, 3, &mut seeded(0, 0));
        lin.weight.value = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        lin.bias.value = vec![0.0; 3];
        let x = Tensor4::new([2, 3, 1, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = lin.forward(&x, Mode::Eval).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn global_avg_pool_of_constant_is_constant() {
        let mut gap = GlobalAvgPool::new();
        let x = Tensor4::new([1, 2, 4, 4], vec![0.25f64; 32]).unwrap();
        let y = gap.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.dims(), [1, 2, 1, 1]);
        assert!((y.at(0, 0, 0, 0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn max_pool_keeps_the_maximum() {
        let mut mp = MaxPool2d::new(3, 2, 1);
        let mut x = Tensor4::<f64>::zeros([1, 1, 8, 8]);
        x.set(0, 0, 4, 5, 7.5);
        let y = mp.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.dims(), [1, 1, 4, 4]);
        let found = y.data().contains(&7.5);
        assert!(found, "maximal element lost by pooling");
    }
}
