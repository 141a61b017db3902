//! Command-line entry point: dataset generation, training, benchmarking,
//! and verification, all reproducible from a seed.
//!
//! Configuration precedence is flags over config file over defaults, and
//! the effective configuration is echoed into every output directory as
//! `effective_config.json`.

use crate::bench::{emit_report, run_monte_carlo, summarize, BenchConfig};
use crate::diffusion::ScenarioRanges;
use crate::error::{Error, Result};
use crate::models::{load_model, save_model, ModelBundle, RegressorConfig, RegressorVariant};
use crate::pipeline::{
    estimate_fields, images_to_tensor, stratified_split, train_inverse, train_regressor,
    TrainConfig,
};
use crate::synth::{
    format_sig, generate_dataset, load_dataset, manifest_hash_hex, ColormapSpec, GeneratorConfig,
    NoiseSpec,
};
use crate::verify::{run_verification, VerifyOptions};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Exit codes: 0 ok, 1 verification failure, 2 usage/config, 3 I/O,
/// 4 data/shape mismatch.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter(_) | Error::Range(_) | Error::Config(_) | Error::Json(_) => 2,
        Error::Io(_) => 3,
        Error::Dimension(_)
        | Error::Format(_)
        | Error::UnsupportedSchema { .. }
        | Error::MissingFile { .. }
        | Error::Contract(_) => 4,
    }
}

#[derive(Parser)]
#[command(
    name = "pgnn",
    about = "Physics-guided inverse regression on moisture-diffusion imagery",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic moisture-image dataset.
    Gen(GenArgs),
    /// Train a model on a generated dataset.
    Train(TrainArgs),
    /// Run the Monte Carlo direct-vs-inverse benchmark.
    Bench(BenchArgs),
    /// Run the built-in verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file (flags override its values).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; every run is bit-deterministic given inputs and seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of samples.
    #[arg(long, default_value_t = 100)]
    n: u64,
    /// Also write ground-truth moisture fields.
    #[arg(long, default_value_t = false)]
    save_fields: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Training mode.
    #[arg(long, value_parser = ["direct", "inverse-stage1", "inverse-stage2"])]
    mode: String,
    /// Dataset directory produced by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    model_out: PathBuf,
    /// Stage-1 model file (required for inverse-stage2).
    #[arg(long)]
    inverse_model: Option<PathBuf>,
    /// Training-set size (stratified from the dataset; the rest is the
    /// evaluation split). Defaults to 80% of the dataset.
    #[arg(long)]
    train_size: Option<usize>,
    /// Regressor backbone.
    #[arg(long, default_value = "resnet-small")]
    variant: String,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output report directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated training sizes.
    #[arg(long, value_delimiter = ',')]
    train_sizes: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    /// Regressor backbone.
    #[arg(long)]
    variant: Option<String>,
    /// Repetition-level parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Corrupt the convolution backward pass to demonstrate the suite's
    /// sensitivity (expected outcome: exit 1 naming conv2d).
    #[arg(long, hide = true, default_value_t = false)]
    inject_conv_fault: bool,
}

// --- configuration file -------------------------------------------------

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    height: Option<usize>,
    width: Option<usize>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    diffusivity: Option<[f64; 2]>,
    edge: Option<[f64; 2]>,
    initial: Option<[f64; 2]>,
    t_eval: Option<[f64; 2]>,
    modes: Option<usize>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    sigma_field: Option<f64>,
    sigma_label: Option<f64>,
    circle_count: Option<[u32; 2]>,
    circle_radius: Option<[u32; 2]>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColormapSection {
    low_rgb: Option<[u8; 3]>,
    high_rgb: Option<[u8; 3]>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    epochs: Option<usize>,
    eval_window: Option<[usize; 2]>,
    lr_inverse: Option<f64>,
    lr_regressor: Option<f64>,
    batch_size: Option<usize>,
    lambda_fidelity: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchSection {
    train_sizes: Option<Vec<usize>>,
    test_size: Option<usize>,
    reps: Option<usize>,
    variant: Option<String>,
    jobs: Option<usize>,
}

/// The JSON run-configuration document. Every field is optional; unknown
/// keys are rejected up front.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    scenario_ranges: ScenarioSection,
    #[serde(default)]
    noise: NoiseSection,
    #[serde(default)]
    colormap: ColormapSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    bench: BenchSection,
}

impl RunConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    fn scenario_ranges(&self) -> ScenarioRanges {
        let d = ScenarioRanges::default();
        ScenarioRanges {
            diffusivity: self.scenario_ranges.diffusivity.unwrap_or(d.diffusivity),
            edge: self.scenario_ranges.edge.unwrap_or(d.edge),
            initial: self.scenario_ranges.initial.unwrap_or(d.initial),
            t_eval: self.scenario_ranges.t_eval.unwrap_or(d.t_eval),
            modes: self.scenario_ranges.modes.unwrap_or(d.modes),
        }
    }

    fn noise(&self) -> NoiseSpec {
        let d = NoiseSpec::default();
        NoiseSpec {
            sigma_field: self.noise.sigma_field.unwrap_or(d.sigma_field),
            sigma_label: self.noise.sigma_label.unwrap_or(d.sigma_label),
            circle_count: self.noise.circle_count.unwrap_or(d.circle_count),
            circle_radius: self.noise.circle_radius.unwrap_or(d.circle_radius),
        }
    }

    fn colormap(&self) -> ColormapSpec {
        let d = ColormapSpec::default();
        ColormapSpec {
            low_rgb: self.colormap.low_rgb.unwrap_or(d.low_rgb),
            high_rgb: self.colormap.high_rgb.unwrap_or(d.high_rgb),
        }
    }

    fn train(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.train.epochs.unwrap_or(d.epochs),
            eval_window: self
                .train
                .eval_window
                .map(|[lo, hi]| (lo, hi))
                .unwrap_or(d.eval_window),
            lr_inverse: self.train.lr_inverse.unwrap_or(d.lr_inverse),
            lr_regressor: self.train.lr_regressor.unwrap_or(d.lr_regressor),
            batch_size: self.train.batch_size.unwrap_or(d.batch_size),
            seed,
            lambda_fidelity: self.train.lambda_fidelity.unwrap_or(d.lambda_fidelity),
        }
    }

    fn grid(&self) -> (usize, usize) {
        (
            self.grid.height.unwrap_or(64),
            self.grid.width.unwrap_or(64),
        )
    }
}

fn echo_effective_config<T: Serialize>(dir: &Path, effective: &T) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(effective)?;
    std::fs::write(dir.join("effective_config.json"), json)?;
    Ok(())
}

// --- commands -------------------------------------------------------------

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let file = RunConfigFile::load(args.common.config.as_deref())?;
    let (height, width) = file.grid();
    let cfg = GeneratorConfig {
        height,
        width,
        n_samples: args.n,
        scenario_ranges: file.scenario_ranges(),
        noise: file.noise(),
        colormap: file.colormap(),
        save_fields: args.save_fields,
    };
    echo_effective_config(
        &args.out,
        &serde_json::json!({
            "command": "gen",
            "seed": args.common.seed,
            "generator": &cfg,
        }),
    )?;
    generate_dataset(&cfg, args.common.seed, &args.out)?;
    println!("manifest hash: {}", manifest_hash_hex(&args.out)?);
    Ok(())
}

fn write_regressor_trace(path: &Path, trace: &[crate::pipeline::TraceRow]) -> Result<()> {
    let mut csv = String::from("epoch,split,rmse,mae,r2,se\n");
    for row in trace {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.epoch,
            row.split,
            format_sig(row.metrics.rmse, 9),
            format_sig(row.metrics.mae, 9),
            row.metrics.r2.map(|v| format_sig(v, 9)).unwrap_or_default(),
            format_sig(row.metrics.se, 9)
        )
        .expect("string write");
    }
    std::fs::write(path, csv)?;
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let file = RunConfigFile::load(args.common.config.as_deref())?;
    let train_cfg = file.train(args.common.seed);
    let variant: RegressorVariant = args.variant.parse()?;
    let (_manifest, records) = load_dataset(&args.data)?;
    if records.is_empty() {
        return Err(Error::dim("dataset is empty"));
    }
    let images: Vec<_> = records.iter().map(|r| r.image.clone()).collect();
    let labels: Vec<f64> = records.iter().map(|r| r.y_noisy).collect();
    let all = images_to_tensor(&images)?;

    let out_dir = args
        .model_out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    echo_effective_config(
        &out_dir,
        &serde_json::json!({
            "command": "train",
            "mode": args.mode,
            "seed": args.common.seed,
            "variant": args.variant,
            "train": &train_cfg,
            "train_size": args.train_size,
        }),
    )?;

    let default_size = (records.len() * 4 / 5).max(1);
    let train_size = args
        .train_size
        .unwrap_or(default_size.min(records.len() - 1));
    if train_size == 0 || train_size >= records.len() {
        return Err(Error::param(format!(
            "train size {train_size} must be positive and leave room for an \
             evaluation split (dataset has {})",
            records.len()
        )));
    }
    let split = stratified_split(&labels, train_size, train_cfg.seed)?;
    if split.degenerate {
        eprintln!(
            "warning: train size {train_size} is below the stratum count; \
             some strata are unrepresented"
        );
    }
    let train_images = crate::pipeline::gather_batch(&all, &split.train);
    let train_labels: Vec<f64> = split.train.iter().map(|&i| labels[i]).collect();
    let test_images = crate::pipeline::gather_batch(&all, &split.test);
    let test_labels: Vec<f64> = split.test.iter().map(|&i| labels[i]).collect();

    let reg_cfg = RegressorConfig {
        variant,
        pretrained: false,
    };
    match args.mode.as_str() {
        "direct" => {
            let out = train_regressor(
                &reg_cfg,
                &train_images,
                &train_labels,
                &test_images,
                &test_labels,
                &train_cfg,
            )?;
            let mut model = out.model;
            save_model(&mut model, &args.model_out)?;
            write_regressor_trace(&out_dir.join("metrics.csv"), &out.trace)?;
            print_windowed("direct", &out.windowed);
        }
        "inverse-stage1" => {
            let out = train_inverse(&train_images, &train_cfg)?;
            let mut model = out.model;
            save_model(&mut model, &args.model_out)?;
            let mut csv = String::from("epoch,loss\n");
            for (i, loss) in out.loss_trace.iter().enumerate() {
                writeln!(csv, "{},{}", i + 1, format_sig(*loss, 9)).expect("string write");
            }
            std::fs::write(out_dir.join("loss_trace.csv"), csv)?;
            println!(
                "stage-1 final physics loss: {}",
                format_sig(*out.loss_trace.last().unwrap(), 9)
            );
            // Simulation ground truth, when stored, gives a field-error
            // diagnostic for the estimated moisture fields.
            if records.iter().all(|r| r.true_field.is_some()) {
                let mse = field_mse(&mut model, &all, &records, train_cfg.batch_size)?;
                println!(
                    "field-estimate MSE vs stored ground truth: {}",
                    format_sig(mse, 9)
                );
            }
        }
        "inverse-stage2" => {
            let inverse_path = args
                .inverse_model
                .as_ref()
                .ok_or_else(|| Error::param("--inverse-model is required for inverse-stage2"))?;
            let mut inverse = load_model(inverse_path)?;
            let est_train = estimate_fields(&mut inverse, &train_images, train_cfg.batch_size)?;
            let est_test = estimate_fields(&mut inverse, &test_images, train_cfg.batch_size)?;
            let out = train_regressor(
                &reg_cfg,
                &est_train,
                &train_labels,
                &est_test,
                &test_labels,
                &train_cfg,
            )?;
            let mut model = out.model;
            save_model(&mut model, &args.model_out)?;
            write_regressor_trace(&out_dir.join("metrics.csv"), &out.trace)?;
            print_windowed("inverse (pgnn)", &out.windowed);
        }
        other => {
            return Err(Error::param(format!("unknown training mode {other:?}")));
        }
    }
    Ok(())
}

fn field_mse(
    inverse: &mut ModelBundle<f32>,
    all_images: &crate::nn::Tensor4<f32>,
    records: &[crate::synth::SampleRecord],
    batch: usize,
) -> Result<f64> {
    let estimates = estimate_fields(inverse, all_images, batch)?;
    let [n, _, h, w] = estimates.dims();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, rec) in records.iter().enumerate().take(n) {
        let truth = rec.true_field.as_ref().expect("caller checked");
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    let d = estimates.at(i, c, y, x) as f64 - truth.get(y, x);
                    sum += d * d;
                    count += 1;
                }
            }
        }
    }
    Ok(sum / count as f64)
}

fn print_windowed(label: &str, m: &crate::bench::Metrics) {
    println!(
        "{label} windowed test metrics: rmse {} mae {} r2 {} se {}",
        format_sig(m.rmse, 9),
        format_sig(m.mae, 9),
        m.r2.map(|v| format_sig(v, 9))
            .unwrap_or_else(|| "n/a".into()),
        format_sig(m.se, 9)
    );
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let file = RunConfigFile::load(args.common.config.as_deref())?;
    let (height, width) = file.grid();
    let defaults = BenchConfig::default();
    let variant = match args.variant.clone().or_else(|| file.bench.variant.clone()) {
        Some(v) => v.parse()?,
        None => RegressorVariant::ResNetSmall,
    };
    let cfg = BenchConfig {
        train_sizes: args
            .train_sizes
            .clone()
            .or_else(|| file.bench.train_sizes.clone())
            .unwrap_or(defaults.train_sizes),
        test_size: args
            .test_size
            .or(file.bench.test_size)
            .unwrap_or(defaults.test_size),
        reps: args.reps.or(file.bench.reps).unwrap_or(defaults.reps),
        height,
        width,
        variant,
        base_seed: args.common.seed,
        scenario_ranges: file.scenario_ranges(),
        noise: file.noise(),
        colormap: file.colormap(),
        train: file.train(args.common.seed),
        jobs: args.jobs.or(file.bench.jobs).unwrap_or(1),
        scramble_labels: false,
    };
    echo_effective_config(
        &args.out,
        &serde_json::json!({ "command": "bench", "bench": &cfg }),
    )?;
    let report = run_monte_carlo(&cfg)?;
    emit_report(&report, &args.out)?;
    println!("model  train_size  rmse_mean  mae_mean  r2_mean  se_mean");
    for s in summarize(&report)? {
        println!(
            "{:<6} {:>10}  {:>9} {:>9} {:>8} {:>8}",
            s.model,
            s.train_size,
            format_sig(s.rmse_mean, 4),
            format_sig(s.mae_mean, 4),
            s.r2_mean
                .map(|v| format_sig(v, 4))
                .unwrap_or_else(|| "n/a".into()),
            format_sig(s.se_mean, 4)
        );
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let opts = VerifyOptions {
        seed: args.common.seed,
        inject_conv_fault: args.inject_conv_fault,
    };
    let results = run_verification(&opts, 5)?;
    let mut failed = Vec::new();
    for r in &results {
        if r.passed {
            println!("ok   {} — {}", r.name, r.detail);
        } else {
            println!("FAIL {} — {}", r.name, r.detail);
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        println!("verification passed ({} checks)", results.len());
        Ok(0)
    } else {
        eprintln!("verification failed: {}", failed.join(", "));
        Ok(1)
    }
}

/// Parses argv and runs the selected command, returning the process exit
/// code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(args) => cmd_gen(args).map(|()| 0),
        Command::Train(args) => cmd_train(args).map(|()| 0),
        Command::Bench(args) => cmd_bench(args).map(|()| 0),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
