//! Batch normalization over the channel dimension.

use super::{Mode, Module, Param, ParamVisit, Scalar, Tensor4};
use crate::error::{Error, Result};

const EPS: f64 = 1e-5;
const MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization for NCHW tensors.
///
/// Training normalizes by batch statistics (biased variance) and updates the
/// running estimates with momentum 0.1 (unbiased variance, the usual
/// convention); eval normalizes by the running estimates.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<S> {
    channels: usize,
    pub gamma: Param<S>,
    pub beta: Param<S>,
    pub running_mean: Param<S>,
    pub running_var: Param<S>,
    cache: Option<TrainCache<S>>,
    eval_cache: Option<EvalCache<S>>,
}

#[derive(Debug, Clone)]
struct TrainCache<S> {
    xhat: Tensor4<S>,
    /// Per-channel 1/sqrt(var + eps).
    inv_std: Vec<f64>,
    count: usize,
}

#[derive(Debug, Clone)]
struct EvalCache<S> {
    input: Tensor4<S>,
}

/// Iterates the contiguous `h*w` run of every (sample, channel) pair that
/// belongs to `target_channel`.
#[inline]
fn channel_runs<S>(
    data: &[S],
    dims: [usize; 4],
    target_channel: usize,
) -> impl Iterator<Item = &[S]> {
    let [n, c, h, w] = dims;
    let run = h * w;
    (0..n).map(move |s| {
        let start = (s * c + target_channel) * run;
        &data[start..start + run]
    })
}

impl<S: Scalar> BatchNorm2d<S> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            channels,
            gamma: Param::filled(&[channels], S::ONE),
            beta: Param::zeros(&[channels]),
            running_mean: Param::zeros(&[channels]),
            running_var: Param::filled(&[channels], S::ONE),
            cache: None,
            eval_cache: None,
        }
    }

    /// Applies `y = g * (x - mean) * inv_std + b` channelwise over the
    /// contiguous spatial runs.
    fn affine_transform(
        x: &Tensor4<S>,
        y: &mut Tensor4<S>,
        ch: usize,
        mean: f64,
        inv_std: f64,
        g: f64,
        b: f64,
    ) {
        let [n, c, h, w] = x.dims();
        let run = h * w;
        let scale = S::from_f64(g * inv_std);
        let shift = S::from_f64(b - g * inv_std * mean);
        for s in 0..n {
            let start = (s * c + ch) * run;
            let src = &x.data()[start..start + run];
            let dst = &mut y.data_mut()[start..start + run];
            for (d, v) in dst.iter_mut().zip(src) {
                *d = scale * *v + shift;
            }
        }
    }
}

impl<S: Scalar> Module<S> for BatchNorm2d<S> {
    fn forward(&mut self, x: &Tensor4<S>, mode: Mode) -> Result<Tensor4<S>> {
        if x.channels() != self.channels {
            return Err(Error::dim(format!(
                "batchnorm expects {} channels, got {}",
                self.channels,
                x.channels()
            )));
        }
        let [n, c, h, w] = x.dims();
        let per_channel = n * h * w;
        let mut y = x.clone();
        match mode {
            Mode::Train => {
                if per_channel < 2 {
                    return Err(Error::dim(
                        "batchnorm train mode needs more than one value per channel \
                         (degenerate variance)",
                    ));
                }
                let mut xhat = Tensor4::zeros(x.dims());
                let mut inv_stds = Vec::with_capacity(c);
                for ch in 0..c {
                    // Stats accumulate in f64 regardless of element type;
                    // eight-lane sums give the compiler a fixed reduction
                    // tree to vectorize.
                    let (mut sum_l, mut sq_l) = ([0.0f64; 8], [0.0f64; 8]);
                    for run in channel_runs(x.data(), x.dims(), ch) {
                        let chunks = run.len() / 8 * 8;
                        let mut i = 0;
                        while i < chunks {
                            for l in 0..8 {
                                let v = run[i + l].to_f64();
                                sum_l[l] += v;
                                sq_l[l] += v * v;
                            }
                            i += 8;
                        }
                        for v in &run[chunks..] {
                            let v = v.to_f64();
                            sum_l[0] += v;
                            sq_l[0] += v * v;
                        }
                    }
                    let sum: f64 = sum_l.iter().sum();
                    let sum_sq: f64 = sq_l.iter().sum();
                    let mean = sum / per_channel as f64;
                    // E[x^2] - mean^2 in f64; activation scales keep the
                    // cancellation far above the 1e-16 noise floor.
                    let var_sum = (sum_sq - sum * mean).max(0.0);
                    let var = var_sum / per_channel as f64;
                    let inv_std = 1.0 / (var + EPS).sqrt();
                    inv_stds.push(inv_std);

                    Self::affine_transform(x, &mut xhat, ch, mean, inv_std, 1.0, 0.0);
                    Self::affine_transform(
                        x,
                        &mut y,
                        ch,
                        mean,
                        inv_std,
                        self.gamma.value[ch].to_f64(),
                        self.beta.value[ch].to_f64(),
                    );

                    let unbiased = var_sum / (per_channel - 1) as f64;
                    let rm = self.running_mean.value[ch].to_f64();
                    let rv = self.running_var.value[ch].to_f64();
                    self.running_mean.value[ch] =
                        S::from_f64((1.0 - MOMENTUM) * rm + MOMENTUM * mean);
                    self.running_var.value[ch] =
                        S::from_f64((1.0 - MOMENTUM) * rv + MOMENTUM * unbiased);
                }
                self.cache = Some(TrainCache {
                    xhat,
                    inv_std: inv_stds,
                    count: per_channel,
                });
                self.eval_cache = None;
            }
            Mode::Eval => {
                for ch in 0..c {
                    let mean = self.running_mean.value[ch].to_f64();
                    let inv_std = 1.0 / (self.running_var.value[ch].to_f64() + EPS).sqrt();
                    Self::affine_transform(
                        x,
                        &mut y,
                        ch,
                        mean,
                        inv_std,
                        self.gamma.value[ch].to_f64(),
                        self.beta.value[ch].to_f64(),
                    );
                }
                self.cache = None;
                self.eval_cache = Some(EvalCache { input: x.clone() });
            }
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        if let Some(cache) = self.cache.take() {
            let dims = cache.xhat.dims();
            let [_, c, _, _] = dims;
            let count = cache.count as f64;
            let mut grad_in = Tensor4::zeros(dims);
            for ch in 0..c {
                let g = self.gamma.value[ch].to_f64();
                // Channel reductions of dL/dy and dL/dy * xhat.
                let mut sum_dy = 0.0;
                let mut sum_dy_xhat = 0.0;
                for (dy_run, xh_run) in channel_runs(grad_out.data(), dims, ch).zip(channel_runs(
                    cache.xhat.data(),
                    dims,
                    ch,
                )) {
                    for (dy, xh) in dy_run.iter().zip(xh_run) {
                        sum_dy += dy.to_f64();
                        sum_dy_xhat += dy.to_f64() * xh.to_f64();
                    }
                }
                self.beta.grad[ch] += S::from_f64(sum_dy);
                self.gamma.grad[ch] += S::from_f64(sum_dy_xhat);

                // dL/dx = gamma*inv_std * (dy - mean(dy) - xhat*mean(dy*xhat))
                let inv_std = cache.inv_std[ch];
                let a = g * inv_std;
                let b1 = sum_dy / count;
                let b2 = sum_dy_xhat / count;
                let [n, cc, h, w] = dims;
                let run = h * w;
                for s in 0..n {
                    let start = (s * cc + ch) * run;
                    let dy_run = &grad_out.data()[start..start + run];
                    let xh_run = &cache.xhat.data()[start..start + run];
                    let gi = &mut grad_in.data_mut()[start..start + run];
                    for i in 0..run {
                        let dy = dy_run[i].to_f64();
                        let xh = xh_run[i].to_f64();
                        gi[i] = S::from_f64(a * (dy - b1 - xh * b2));
                    }
                }
            }
            grad_in
        } else if let Some(ec) = self.eval_cache.take() {
            // Running stats are constants in eval mode; gamma and beta still
            // receive gradient through the affine map.
            let dims = ec.input.dims();
            let [n, c, h, w] = dims;
            let run = h * w;
            let mut grad_in = Tensor4::zeros(dims);
            for ch in 0..c {
                let g = self.gamma.value[ch].to_f64();
                let mean = self.running_mean.value[ch].to_f64();
                let inv_std = 1.0 / (self.running_var.value[ch].to_f64() + EPS).sqrt();
                let mut sum_dy = 0.0;
                let mut sum_dy_xhat = 0.0;
                for s in 0..n {
                    let start = (s * c + ch) * run;
                    let dy_run = &grad_out.data()[start..start + run];
                    let x_run = &ec.input.data()[start..start + run];
                    let gi = &mut grad_in.data_mut()[start..start + run];
                    for i in 0..run {
                        let dy = dy_run[i].to_f64();
                        let xh = (x_run[i].to_f64() - mean) * inv_std;
                        sum_dy += dy;
                        sum_dy_xhat += dy * xh;
                        gi[i] = S::from_f64(dy * g * inv_std);
                    }
                }
                self.beta.grad[ch] += S::from_f64(sum_dy);
                self.gamma.grad[ch] += S::from_f64(sum_dy_xhat);
            }
            grad_in
        } else {
            panic!("batchnorm backward before forward");
        }
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        f(self.gamma.visit(format!("{prefix}gamma")));
        f(self.beta.visit(format!("{prefix}beta")));
    }

    fn visit_state(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        f(self
            .running_mean
            .visit_stat(format!("{prefix}running_mean")));
        f(self.running_var.visit_stat(format!("{prefix}running_var")));
    }
}
