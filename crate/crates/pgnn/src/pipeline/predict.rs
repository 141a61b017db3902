//! The two prediction strategies.

use super::train::{clip01, gather_batch};
use crate::error::{Error, Result};
use crate::models::ModelBundle;
use crate::nn::Tensor4;

fn require_eval(model: &ModelBundle<f32>, what: &str) -> Result<()> {
    if model.is_training() {
        return Err(Error::Contract(format!(
            "{what} must be in eval mode for prediction"
        )));
    }
    Ok(())
}

/// Direct prediction: the regressor maps images straight to labels.
pub fn predict_direct(
    model: &mut ModelBundle<f32>,
    images: &Tensor4<f32>,
    batch_size: usize,
) -> Result<Vec<f64>> {
    require_eval(model, "direct model")?;
    let n = images.batch();
    let idx: Vec<usize> = (0..n).collect();
    let mut preds = Vec::with_capacity(n);
    for chunk in idx.chunks(batch_size) {
        let batch = gather_batch(images, chunk);
        let out = model.forward(&batch)?;
        preds.extend(out.as_scalars()?.iter().map(|&v| v as f64));
    }
    Ok(preds)
}

/// Applies the inverse network and clips the estimate to the moisture range,
/// producing the second stage's input.
pub fn estimate_fields(
    inverse: &mut ModelBundle<f32>,
    images: &Tensor4<f32>,
    batch_size: usize,
) -> Result<Tensor4<f32>> {
    require_eval(inverse, "inverse network")?;
    let [n, _, h, w] = images.dims();
    let mut out = Tensor4::zeros([n, 3, h, w]);
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(batch_size) {
        let batch = gather_batch(images, chunk);
        let mut est = inverse.forward(&batch)?;
        clip01(&mut est);
        for (row, &i) in chunk.iter().enumerate() {
            out.sample_mut(i).copy_from_slice(est.sample(row));
        }
    }
    Ok(out)
}

/// Inverse prediction: moisture-field estimation followed by regression on
/// the clipped estimate.
pub fn predict_inverse(
    inverse: &mut ModelBundle<f32>,
    regressor: &mut ModelBundle<f32>,
    images: &Tensor4<f32>,
    batch_size: usize,
) -> Result<Vec<f64>> {
    require_eval(regressor, "second-stage regressor")?;
    let estimates = estimate_fields(inverse, images, batch_size)?;
    predict_direct(regressor, &estimates, batch_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{InverseNetConfig, RegressorConfig};
    use crate::rng::seeded;
    use rand::Rng;

    fn eval_bundles() -> (ModelBundle<f32>, ModelBundle<f32>) {
        let mut inv = ModelBundle::build_inverse(&InverseNetConfig::default(), 1).unwrap();
        let mut reg = ModelBundle::build_regressor(&RegressorConfig::small(), 2).unwrap();
        inv.set_training(false);
        reg.set_training(false);
        (inv, reg)
    }

    #[test]
    fn both_paths_yield_one_scalar_per_sample() {
        let (mut inv, mut reg) = eval_bundles();
        let mut rng = seeded(3, 0);
        let z = Tensor4::from_fn([1, 3, 16, 16], |_, _, _, _| rng.random_range(0.0..1.0f32));
        let direct = predict_direct(&mut reg, &z, 4).unwrap();
        assert_eq!(direct.len(), 1);
        let inverse = predict_inverse(&mut inv, &mut reg, &z, 4).unwrap();
        assert_eq!(inverse.len(), 1);
    }

    #[test]
    fn repeated_eval_calls_are_identical() {
        let (mut inv, mut reg) = eval_bundles();
        let mut rng = seeded(4, 0);
        let z = Tensor4::from_fn([3, 3, 16, 16], |_, _, _, _| rng.random_range(0.0..1.0f32));
        let a = predict_inverse(&mut inv, &mut reg, &z, 2).unwrap();
        let b = predict_inverse(&mut inv, &mut reg, &z, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_mode_models_are_rejected() {
        let (mut inv, mut reg) = eval_bundles();
        reg.set_training(true);
        let z = Tensor4::<f32>::zeros([1, 3, 16, 16]);
        assert!(predict_direct(&mut reg, &z, 4).is_err());
        assert!(predict_inverse(&mut inv, &mut reg, &z, 4).is_err());
    }

    #[test]
    fn inverse_estimates_are_clipped() {
        let (mut inv, _) = eval_bundles();
        let mut rng = seeded(5, 0);
        let z = Tensor4::from_fn([2, 3, 16, 16], |_, _, _, _| rng.random_range(0.0..1.0f32));
        let est = estimate_fields(&mut inv, &z, 2).unwrap();
        assert!(est.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
