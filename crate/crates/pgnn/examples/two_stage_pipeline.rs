//! The full two-stage pipeline at toy scale: generate a dataset, train the
//! inverse network unsupervised, train the regressor on its estimated
//! fields, and compare against direct prediction.

use pgnn::bench::compute_metrics;
use pgnn::models::RegressorConfig;
use pgnn::pipeline::{
    estimate_fields, images_to_tensor, predict_direct, predict_inverse, train_inverse,
    train_regressor, TrainConfig,
};
use pgnn::synth::{generate_sample, GeneratorConfig};

fn main() -> pgnn::Result<()> {
    // 24 training and 12 test samples on a small grid.
    let gen_cfg = GeneratorConfig::new(32, 32, 0);
    let make = |seed: u64, count: usize| -> pgnn::Result<(pgnn::nn::Tensor4<f32>, Vec<f64>)> {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..count {
            let s = generate_sample(&gen_cfg, seed, i as u64)?;
            images.push(s.image);
            labels.push(s.y_noisy);
        }
        Ok((images_to_tensor(&images)?, labels))
    };
    let (train_images, train_labels) = make(1, 24)?;
    let (test_images, test_labels) = make(2, 12)?;

    let cfg = TrainConfig {
        epochs: 20,
        eval_window: (10, 20),
        lr_regressor: 1e-3,
        seed: 3,
        ..TrainConfig::default()
    };

    // Direct: images straight to labels.
    let direct = train_regressor(
        &RegressorConfig::small(),
        &train_images,
        &train_labels,
        &test_images,
        &test_labels,
        &cfg,
    )?;

    // Inverse: unsupervised physics stage, then regression on the
    // estimated moisture fields.
    let stage1 = train_inverse(&train_images, &cfg)?;
    let mut inverse = stage1.model;
    let est_train = estimate_fields(&mut inverse, &train_images, cfg.batch_size)?;
    let est_test = estimate_fields(&mut inverse, &test_images, cfg.batch_size)?;
    let stage2 = train_regressor(
        &RegressorConfig::small(),
        &est_train,
        &train_labels,
        &est_test,
        &test_labels,
        &cfg,
    )?;

    let mut direct_model = direct.model;
    let mut second_stage = stage2.model;
    let direct_preds = predict_direct(&mut direct_model, &test_images, 16)?;
    let inverse_preds = predict_inverse(&mut inverse, &mut second_stage, &test_images, 16)?;
    let dm = compute_metrics(&direct_preds, &test_labels)?;
    let im = compute_metrics(&inverse_preds, &test_labels)?;
    println!("direct  rmse {:.4}", dm.rmse);
    println!("inverse rmse {:.4}", im.rmse);
    Ok(())
}
