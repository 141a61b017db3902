//! Null-experiment control: with labels replaced by independent noise,
//! neither strategy can beat the mean predictor.

use pgnn::bench::{run_monte_carlo, summarize, BenchConfig};
use pgnn::pipeline::TrainConfig;

#[test]
fn scrambled_labels_kill_both_models() {
    let cfg = BenchConfig {
        train_sizes: vec![15],
        test_size: 30,
        reps: 1,
        height: 32,
        width: 32,
        base_seed: 77,
        scramble_labels: true,
        jobs: 1,
        train: TrainConfig {
            epochs: 10,
            eval_window: (5, 10),
            lr_regressor: 1e-3,
            ..TrainConfig::default()
        },
        ..BenchConfig::default()
    };
    let report = run_monte_carlo(&cfg).unwrap();
    let summary = summarize(&report).unwrap();
    assert_eq!(summary.len(), 2);
    for s in &summary {
        let r2 = s.r2_mean.expect("noise labels still have spread");
        assert!(
            r2 <= 0.1,
            "{} reached r2 {r2} on scrambled labels; information leaked",
            s.model
        );
    }
}
