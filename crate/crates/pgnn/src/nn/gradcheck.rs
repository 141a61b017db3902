//! Finite-difference verification of analytic gradients.

use super::{Mode, Module, ParamVisit, Tensor4};
use crate::error::Result;
use crate::rng::seeded;
use rand::seq::SliceRandom;

/// A differentiable scalar objective over a module's output.
pub trait ScalarObjective {
    fn loss(&self, y: &Tensor4<f64>) -> f64;
    fn grad(&self, y: &Tensor4<f64>) -> Tensor4<f64>;
}

/// `L = sum(y^2)`; a simple probe objective.
pub struct SumSquares;

impl ScalarObjective for SumSquares {
    fn loss(&self, y: &Tensor4<f64>) -> f64 {
        y.data().iter().map(|v| v * v).sum()
    }

    fn grad(&self, y: &Tensor4<f64>) -> Tensor4<f64> {
        let mut g = y.clone();
        for v in g.data_mut() {
            *v *= 2.0;
        }
        g
    }
}

/// `L = <y, r>` for a fixed random direction `r` with entries bounded away
/// from zero. Linear in `y`, so finite differences are exact up to rounding,
/// and no layer symmetry (such as batch normalization's shift invariance)
/// can collapse the gradient signal.
pub struct DotProbe {
    r: Tensor4<f64>,
}

impl DotProbe {
    /// `dims` must match the module's output.
    pub fn new(dims: [usize; 4], seed: u64) -> Self {
        use rand::Rng;
        let mut rng = seeded(seed, 0x0d07);
        let r = Tensor4::from_fn(dims, |_, _, _, _| {
            let m: f64 = rng.random_range(0.5..1.5);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        });
        DotProbe { r }
    }
}

impl ScalarObjective for DotProbe {
    fn loss(&self, y: &Tensor4<f64>) -> f64 {
        y.data().iter().zip(self.r.data()).map(|(a, b)| a * b).sum()
    }

    fn grad(&self, _y: &Tensor4<f64>) -> Tensor4<f64> {
        self.r.clone()
    }
}

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub coords_checked: usize,
}

/// A checkable coordinate: either a parameter element or an input element.
#[derive(Debug, Clone)]
enum Coord {
    Param { name: String, index: usize },
    Input { index: usize },
}

fn param_sizes<M: Module<f64>>(model: &mut M) -> Vec<(String, usize)> {
    let mut sizes = Vec::new();
    model.visit_params("", &mut |p: ParamVisit<'_, f64>| {
        sizes.push((p.name.clone(), p.value.len()));
    });
    sizes
}

fn add_to_param<M: Module<f64>>(model: &mut M, name: &str, index: usize, delta: f64) {
    model.visit_params("", &mut |p: ParamVisit<'_, f64>| {
        if p.name == name {
            p.value[index] += delta;
        }
    });
}

fn read_param_grad<M: Module<f64>>(model: &mut M, name: &str, index: usize) -> f64 {
    let mut out = 0.0;
    model.visit_params("", &mut |p: ParamVisit<'_, f64>| {
        if p.name == name {
            out = p.grad[index];
        }
    });
    out
}

/// Compares analytic gradients against central finite differences on up to
/// `max_coords` randomly sampled parameter and input coordinates.
///
/// Preconditions: double precision and dropout disabled (build check models
/// with dropout probability zero). `mode` is used for every forward pass;
/// batch-norm running-stat updates during the extra forwards are harmless
/// because training-mode outputs depend only on batch statistics.
pub fn grad_check<M: Module<f64>>(
    model: &mut M,
    input: &Tensor4<f64>,
    objective: &dyn ScalarObjective,
    mode: Mode,
    eps: f64,
    max_coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    // Analytic pass.
    model.zero_grad();
    let y = model.forward(input, mode)?;
    let grad_y = objective.grad(&y);
    let grad_input = model.backward(&grad_y);

    // Enumerate and sample coordinates.
    let mut coords = Vec::new();
    for (name, len) in param_sizes(model) {
        for index in 0..len {
            coords.push(Coord::Param {
                name: name.clone(),
                index,
            });
        }
    }
    for index in 0..input.len() {
        coords.push(Coord::Input { index });
    }
    let mut rng = seeded(seed, 0x6_7243);
    coords.shuffle(&mut rng);
    coords.truncate(max_coords);

    let mut max_rel = 0.0f64;
    let mut perturbed = input.clone();
    for coord in &coords {
        let eval = |model: &mut M, input: &Tensor4<f64>| -> Result<f64> {
            let y = model.forward(input, mode)?;
            Ok(objective.loss(&y))
        };
        let (analytic, numeric) = match coord {
            Coord::Param { name, index } => {
                add_to_param(model, name, *index, eps);
                let plus = eval(model, input)?;
                add_to_param(model, name, *index, -2.0 * eps);
                let minus = eval(model, input)?;
                add_to_param(model, name, *index, eps);
                (
                    read_param_grad(model, name, *index),
                    (plus - minus) / (2.0 * eps),
                )
            }
            Coord::Input { index } => {
                perturbed.data_mut().copy_from_slice(input.data());
                perturbed.data_mut()[*index] += eps;
                let plus = eval(model, &perturbed)?;
                perturbed.data_mut()[*index] -= 2.0 * eps;
                let minus = eval(model, &perturbed)?;
                perturbed.data_mut()[*index] += eps;
                (grad_input.data()[*index], (plus - minus) / (2.0 * eps))
            }
        };
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / denom;
        max_rel = max_rel.max(rel);
    }

    Ok(GradCheckReport {
        max_rel_err: max_rel,
        coords_checked: coords.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::DotProbe;
    use super::*;
    use crate::nn::{
        BatchNorm2d, Conv2d, ConvTranspose2d, GlobalAvgPool, LeakyRelu, Linear, MaxPool2d, Relu,
    };
    use crate::rng::seeded;
    use rand::Rng;

    fn random_input(dims: [usize; 4], seed: u64) -> Tensor4<f64> {
        let mut rng = seeded(seed, 1);
        // Keep magnitudes away from activation kinks relative to eps=1e-5.
        Tensor4::from_fn(dims, |_, _, _, _| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        })
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut lin: Linear<f64> = Linear::new(6, 4, &mut seeded(2, 0));
        let x = random_input([3, 6, 1, 1], 3);
        let report = grad_check(&mut lin, &x, &SumSquares, Mode::Train, 1e-5, 200, 7).unwrap();
        assert!(report.max_rel_err <= 1e-7, "{report:?}");
    }

    #[test]
    fn conv2d_gradients_match_finite_differences() {
        let mut conv: Conv2d<f64> = Conv2d::new(2, 3, 3, 1, 1, &mut seeded(4, 0));
        let x = random_input([2, 2, 6, 6], 5);
        let probe = DotProbe::new([2, 3, 6, 6], 100);
        let report = grad_check(&mut conv, &x, &probe, Mode::Train, 1e-5, 200, 11).unwrap();
        assert!(report.max_rel_err <= 1e-6, "{report:?}");
    }

    #[test]
    fn strided_conv_gradients_match_finite_differences() {
        let mut conv: Conv2d<f64> = Conv2d::new(3, 4, 3, 2, 1, &mut seeded(6, 0));
        let x = random_input([2, 3, 7, 7], 7);
        let probe = DotProbe::new([2, 4, 4, 4], 101);
        let report = grad_check(&mut conv, &x, &probe, Mode::Train, 1e-5, 200, 13).unwrap();
        assert!(report.max_rel_err <= 1e-6, "{report:?}");
    }

    #[test]
    fn conv_transpose_gradients_match_finite_differences() {
        let mut tr: ConvTranspose2d<f64> = ConvTranspose2d::new(3, 2, 3, 1, 1, &mut seeded(8, 0));
        let x = random_input([2, 3, 5, 5], 9);
        let probe = DotProbe::new([2, 2, 5, 5], 102);
        let report = grad_check(&mut tr, &x, &probe, Mode::Train, 1e-5, 200, 17).unwrap();
        assert!(report.max_rel_err <= 1e-6, "{report:?}");
    }

    #[test]
    fn batchnorm_gradients_match_finite_differences() {
        let mut bn: BatchNorm2d<f64> = BatchNorm2d::new(3);
        // Anisotropic input so gamma/beta gradients are nontrivial.
        let mut rng = seeded(10, 0);
        let x = Tensor4::from_fn([4, 3, 5, 5], |_, c, _, _| {
            rng.random_range(-1.0..1.0) * (1.0 + c as f64)
        });
        let probe = DotProbe::new([4, 3, 5, 5], 103);
        let train = grad_check(&mut bn, &x, &probe, Mode::Train, 1e-5, 200, 19).unwrap();
        assert!(train.max_rel_err <= 1e-6, "train {train:?}");
        let eval = grad_check(&mut bn, &x, &probe, Mode::Eval, 1e-5, 200, 23).unwrap();
        assert!(eval.max_rel_err <= 1e-7, "eval {eval:?}");
    }

    #[test]
    fn activation_and_pool_gradients_match_finite_differences() {
        let x = random_input([2, 3, 6, 6], 11);
        let probe = DotProbe::new([2, 3, 6, 6], 104);
        let mut relu: Relu<f64> = Relu::new();
        let r = grad_check(&mut relu, &x, &probe, Mode::Train, 1e-5, 150, 29).unwrap();
        assert!(r.max_rel_err <= 1e-6, "relu {r:?}");

        let mut lrelu: LeakyRelu<f64> = LeakyRelu::new();
        let r = grad_check(&mut lrelu, &x, &probe, Mode::Train, 1e-5, 150, 31).unwrap();
        assert!(r.max_rel_err <= 1e-6, "leaky {r:?}");

        let mut gap = GlobalAvgPool::new();
        let probe_gap = DotProbe::new([2, 3, 1, 1], 105);
        let r = grad_check(&mut gap, &x, &probe_gap, Mode::Train, 1e-5, 150, 37).unwrap();
        assert!(r.max_rel_err <= 1e-7, "gap {r:?}");

        let mut mp = MaxPool2d::new(3, 2, 1);
        let probe_mp = DotProbe::new([2, 3, 3, 3], 106);
        let r = grad_check(&mut mp, &x, &probe_mp, Mode::Train, 1e-5, 150, 41).unwrap();
        assert!(r.max_rel_err <= 1e-6, "maxpool {r:?}");
    }
}
