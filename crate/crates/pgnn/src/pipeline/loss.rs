//! The two training objectives.

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor4};

/// Mean squared steady-state diffusion residual.
///
/// For every sample, channel, and interior pixel, applies the 5-point
/// Laplacian stencil in pixel units and averages the squared result over
/// `batch * channels * interior` positions. A harmonic field (constant,
/// bilinear) has zero loss; minimizers are exactly the discretely harmonic
/// fields.
pub fn physics_loss<S: Scalar>(batch: &Tensor4<S>) -> Result<f64> {
    Ok(physics_loss_and_grad(batch)?.0)
}

/// Loss plus its gradient with respect to the batch.
pub fn physics_loss_and_grad<S: Scalar>(batch: &Tensor4<S>) -> Result<(f64, Tensor4<S>)> {
    let [n, c, h, w] = batch.dims();
    if h < 3 || w < 3 {
        return Err(Error::dim(format!(
            "physics loss needs spatial dims >= 3, got {h}x{w}"
        )));
    }
    let count = (n * c * (h - 2) * (w - 2)) as f64;
    let mut total = 0.0;
    // Residuals in f64; laplacian magnitudes square quickly.
    let mut lap = vec![0.0f64; n * c * (h - 2) * (w - 2)];
    let mut pos = 0;
    for s in 0..n {
        for ch in 0..c {
            for i in 1..h - 1 {
                for j in 1..w - 1 {
                    let center = batch.at(s, ch, i, j).to_f64();
                    let r = batch.at(s, ch, i - 1, j).to_f64()
                        + batch.at(s, ch, i + 1, j).to_f64()
                        + batch.at(s, ch, i, j - 1).to_f64()
                        + batch.at(s, ch, i, j + 1).to_f64()
                        - 4.0 * center;
                    lap[pos] = r;
                    total += r * r;
                    pos += 1;
                }
            }
        }
    }
    let loss = total / count;

    // d loss / d x = (2 / count) * adjoint-stencil(lap); the stencil is
    // symmetric, so the adjoint scatters with the same weights.
    let mut grad = Tensor4::zeros(batch.dims());
    let scale = 2.0 / count;
    let mut pos = 0;
    for s in 0..n {
        for ch in 0..c {
            for i in 1..h - 1 {
                for j in 1..w - 1 {
                    let g = lap[pos] * scale;
                    pos += 1;
                    let idx = grad.idx(s, ch, i, j);
                    grad.data_mut()[idx] += S::from_f64(-4.0 * g);
                    let idx = grad.idx(s, ch, i - 1, j);
                    grad.data_mut()[idx] += S::from_f64(g);
                    let idx = grad.idx(s, ch, i + 1, j);
                    grad.data_mut()[idx] += S::from_f64(g);
                    let idx = grad.idx(s, ch, i, j - 1);
                    grad.data_mut()[idx] += S::from_f64(g);
                    let idx = grad.idx(s, ch, i, j + 1);
                    grad.data_mut()[idx] += S::from_f64(g);
                }
            }
        }
    }
    Ok((loss, grad))
}

/// [`crate::nn::ScalarObjective`] adapter for the physics loss, used by the
/// gradient checker to verify the loss end to end through a network.
pub struct PhysicsObjective;

impl crate::nn::ScalarObjective for PhysicsObjective {
    fn loss(&self, y: &Tensor4<f64>) -> f64 {
        physics_loss(y).expect("grad-check tensors satisfy the loss preconditions")
    }

    fn grad(&self, y: &Tensor4<f64>) -> Tensor4<f64> {
        physics_loss_and_grad(y)
            .expect("grad-check tensors satisfy the loss preconditions")
            .1
    }
}

/// Mean squared error between predictions and targets.
pub fn supervised_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::dim("supervised loss needs a non-empty batch"));
    }
    if preds.len() != targets.len() {
        return Err(Error::dim(format!(
            "prediction count {} != target count {}",
            preds.len(),
            targets.len()
        )));
    }
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64)
}

/// MSE plus its gradient with respect to the predictions.
pub fn supervised_loss_and_grad(preds: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = supervised_loss(preds, targets)?;
    let n = preds.len() as f64;
    let grad = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_batch_has_zero_loss() {
        let batch = Tensor4::new([2, 3, 8, 8], vec![0.42f64; 2 * 3 * 64]).unwrap();
        assert_eq!(physics_loss(&batch).unwrap(), 0.0);
    }

    #[test]
    fn bilinear_ramps_have_zero_loss() {
        // x[c,i,j] = a_c * i * j is annihilated by the stencil.
        let batch = Tensor4::from_fn([1, 3, 8, 8], |_, c, i, j| {
            (c as f64 + 1.0) * 0.1 * (i * j) as f64
        });
        assert!(physics_loss(&batch).unwrap() < 1e-24);
    }

    #[test]
    fn quadratic_single_channel_fixture() {
        // i^2 on one channel: residual 2 on every interior pixel, squared
        // is 4, averaged over three channels gives 4/3.
        let batch = Tensor4::from_fn(
            [1, 3, 8, 8],
            |_, c, i, _| if c == 0 { (i * i) as f64 } else { 0.0 },
        );
        let loss = physics_loss(&batch).unwrap();
        assert!((loss - 4.0 / 3.0).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn tiny_spatial_dims_error() {
        let batch = Tensor4::<f64>::zeros([1, 3, 2, 8]);
        assert!(physics_loss(&batch).is_err());
    }

    #[test]
    fn physics_grad_matches_finite_differences() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(77, 0);
        let batch = Tensor4::from_fn([2, 3, 6, 6], |_, _, _, _| rng.random_range(-1.0..1.0));
        let (_, grad) = physics_loss_and_grad(&batch).unwrap();
        let eps = 1e-6;
        let mut perturbed = batch.clone();
        for probe in [0usize, 17, 100, 151, 215] {
            perturbed.data_mut().copy_from_slice(batch.data());
            perturbed.data_mut()[probe] += eps;
            let plus = physics_loss(&perturbed).unwrap();
            perturbed.data_mut()[probe] -= 2.0 * eps;
            let minus = physics_loss(&perturbed).unwrap();
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grad.data()[probe];
            assert!(
                (numeric - analytic).abs() <= 1e-7 * analytic.abs().max(1.0),
                "coord {probe}: analytic {analytic}, numeric {numeric}"
            );
        }
    }

    #[test]
    fn supervised_loss_examples() {
        assert_eq!(supervised_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(supervised_loss(&[1.0, 2.0], &[1.0, 4.0]).unwrap(), 2.0);
        // Translation invariance of residuals.
        let a = supervised_loss(&[1.5, 2.5], &[1.0, 4.0]).unwrap();
        let b = supervised_loss(&[11.5, 12.5], &[11.0, 14.0]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(supervised_loss(&[], &[]).is_err());
    }
}
