//! A minimal Monte Carlo run: two repetitions, one training size, report
//! files written to a temporary directory.

use pgnn::bench::{emit_report, run_monte_carlo, summarize, BenchConfig};
use pgnn::pipeline::TrainConfig;

fn main() -> pgnn::Result<()> {
    let cfg = BenchConfig {
        train_sizes: vec![10],
        test_size: 12,
        reps: 2,
        height: 24,
        width: 24,
        base_seed: 5,
        train: TrainConfig {
            epochs: 8,
            eval_window: (4, 8),
            ..TrainConfig::default()
        },
        ..BenchConfig::default()
    };
    let report = run_monte_carlo(&cfg)?;
    for s in summarize(&report)? {
        println!(
            "{:>6} @ {:>2}: rmse {:.4} ± {:.4}",
            s.model, s.train_size, s.rmse_mean, s.rmse_std
        );
    }
    let out = std::env::temp_dir().join("pgnn_tiny_report");
    emit_report(&report, &out)?;
    println!("report files in {}", out.display());
    Ok(())
}
