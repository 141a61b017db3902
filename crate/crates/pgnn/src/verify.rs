//! Built-in verification suite: gradient checks, solver-vs-oracle
//! agreement, colormap round trip, and physics-loss analytics.
//!
//! Every check is pure and seeded; the suite is the backing for the
//! `verify` CLI command and part of the acceptance gate.

use crate::diffusion::{
    interior_sup_distance, sample_scenario, solve_fd_oracle, solve_fourier, ScenarioRanges,
};
use crate::error::Result;
use crate::field::{GridSpec, MoistureField};
use crate::models::{InverseNet, InverseNetConfig};
use crate::nn::{
    grad_check, BatchNorm2d, Conv2d, ConvTranspose2d, DotProbe, Linear, Mode, Tensor4,
};
use crate::pipeline::{physics_loss, PhysicsObjective};
use crate::rng::seeded;
use crate::synth::{invert_colormap, render_colormap, ColormapSpec};
use rand::Rng;

/// Outcome of one verification check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckResult {
            name,
            passed,
            detail,
        }
    }
}

/// Knobs for the suite; `inject_conv_fault` deliberately corrupts the
/// convolution backward pass so the suite's sensitivity can be demonstrated.
#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    pub inject_conv_fault: bool,
}

fn random_input(dims: [usize; 4], seed: u64) -> Tensor4<f64> {
    let mut rng = seeded(seed, 3);
    Tensor4::from_fn(dims, |_, _, _, _| {
        let v: f64 = rng.random_range(0.05..1.0);
        if rng.random::<bool>() {
            v
        } else {
            -v
        }
    })
}

fn check_gradients(opts: &VerifyOptions, out: &mut Vec<CheckResult>) -> Result<()> {
    let seed = opts.seed;

    let mut lin: Linear<f64> = Linear::new(6, 4, &mut seeded(seed, 10));
    let x = random_input([3, 6, 1, 1], seed + 1);
    let probe = DotProbe::new([3, 4, 1, 1], seed + 2);
    let r = grad_check(&mut lin, &x, &probe, Mode::Train, 1e-5, 200, seed + 3)?;
    out.push(CheckResult::new(
        "grad/linear",
        r.max_rel_err <= 1e-7,
        format!("max rel err {:.3e} (tol 1e-7)", r.max_rel_err),
    ));

    let mut conv: Conv2d<f64> = Conv2d::new(2, 3, 3, 1, 1, &mut seeded(seed, 11));
    if opts.inject_conv_fault {
        conv.backward_fault = Some(1.5);
    }
    let x = random_input([2, 2, 6, 6], seed + 4);
    let probe = DotProbe::new([2, 3, 6, 6], seed + 5);
    let r = grad_check(&mut conv, &x, &probe, Mode::Train, 1e-5, 200, seed + 6)?;
    out.push(CheckResult::new(
        "grad/conv2d",
        r.max_rel_err <= 1e-6,
        format!("max rel err {:.3e} (tol 1e-6)", r.max_rel_err),
    ));

    let mut tr: ConvTranspose2d<f64> = ConvTranspose2d::new(3, 2, 3, 1, 1, &mut seeded(seed, 12));
    let x = random_input([2, 3, 5, 5], seed + 7);
    let probe = DotProbe::new([2, 2, 5, 5], seed + 8);
    let r = grad_check(&mut tr, &x, &probe, Mode::Train, 1e-5, 200, seed + 9)?;
    out.push(CheckResult::new(
        "grad/conv_transpose2d",
        r.max_rel_err <= 1e-6,
        format!("max rel err {:.3e} (tol 1e-6)", r.max_rel_err),
    ));

    let mut bn: BatchNorm2d<f64> = BatchNorm2d::new(3);
    let x = random_input([4, 3, 5, 5], seed + 10);
    let probe = DotProbe::new([4, 3, 5, 5], seed + 11);
    let r = grad_check(&mut bn, &x, &probe, Mode::Train, 1e-5, 200, seed + 12)?;
    out.push(CheckResult::new(
        "grad/batchnorm2d",
        r.max_rel_err <= 1e-6,
        format!("max rel err {:.3e} (tol 1e-6)", r.max_rel_err),
    ));

    // End to end: physics loss of the inverse network, dropout disabled.
    let cfg = InverseNetConfig { dropout: 0.0 };
    let mut net: InverseNet<f64> = InverseNet::build(&cfg, seed + 13)?;
    let mut rng = seeded(seed, 14);
    let x = Tensor4::from_fn([2, 3, 10, 10], |_, _, _, _| rng.random_range(0.0..1.0));
    let r = grad_check(
        &mut net,
        &x,
        &PhysicsObjective,
        Mode::Train,
        1e-5,
        200,
        seed + 15,
    )?;
    out.push(CheckResult::new(
        "grad/inverse_net_physics_loss",
        r.max_rel_err <= 1e-4,
        format!("max rel err {:.3e} (tol 1e-4)", r.max_rel_err),
    ));
    Ok(())
}

fn check_solver(opts: &VerifyOptions, scenarios: usize, out: &mut Vec<CheckResult>) -> Result<()> {
    let grid = GridSpec::new(64, 64)?;
    let ranges = ScenarioRanges::default();
    let mut rng = seeded(opts.seed, 20);
    let mut worst: f64 = 0.0;
    for _ in 0..scenarios {
        let s = sample_scenario(&mut rng, &ranges)?;
        let fourier = solve_fourier(&s, grid)?;
        let fd = solve_fd_oracle(&s, grid)?;
        worst = worst.max(interior_sup_distance(&fourier, &fd, 2));
    }
    out.push(CheckResult::new(
        "solver/fourier_vs_fd_oracle",
        worst <= 2e-2,
        format!("max sup-norm {worst:.3e} over {scenarios} scenarios (tol 2e-2)"),
    ));
    Ok(())
}

fn check_colormap(opts: &VerifyOptions, out: &mut Vec<CheckResult>) -> Result<()> {
    let cm = ColormapSpec::default();
    let grid = GridSpec::new(8, 8)?;
    let mut rng = seeded(opts.seed, 30);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = rng.random_range(0.0..=1.0);
        let img = render_colormap(&MoistureField::constant(grid, x), &cm)?;
        let back = invert_colormap(&img, &cm);
        worst = worst.max((back.get(0, 0) - x).abs());
    }
    let tol = 0.5 / 255.0 + 1e-9;
    out.push(CheckResult::new(
        "colormap/round_trip",
        worst <= tol,
        format!("max error {worst:.6e} (tol {tol:.6e})"),
    ));
    Ok(())
}

fn check_physics_analytics(out: &mut Vec<CheckResult>) -> Result<()> {
    let constant = Tensor4::new([2, 3, 8, 8], vec![0.37f64; 2 * 3 * 64])?;
    let bilinear = Tensor4::from_fn([1, 3, 8, 8], |_, c, i, j| {
        0.2 + 0.05 * (c as f64 + 1.0) * (i * j) as f64
    });
    let harmonic_ok = physics_loss(&constant)? <= 1e-10 && physics_loss(&bilinear)? <= 1e-10;
    out.push(CheckResult::new(
        "physics/harmonic_zero",
        harmonic_ok,
        "constant and bilinear batches (tol 1e-10)".to_string(),
    ));

    let quad = Tensor4::from_fn(
        [1, 3, 8, 8],
        |_, c, i, _| if c == 0 { (i * i) as f64 } else { 0.0 },
    );
    let loss = physics_loss(&quad)?;
    out.push(CheckResult::new(
        "physics/quadratic_fixture",
        (loss - 4.0 / 3.0).abs() <= 1e-6,
        format!("i^2 single-channel loss {loss:.9} (expected 4/3)"),
    ));
    Ok(())
}

/// Runs every check. `scenarios` controls the solver comparison's sample
/// count (the CLI uses 5 for speed; the acceptance gate uses 20).
pub fn run_verification(opts: &VerifyOptions, scenarios: usize) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    check_gradients(opts, &mut out)?;
    check_solver(opts, scenarios, &mut out)?;
    check_colormap(opts, &mut out)?;
    check_physics_analytics(&mut out)?;
    Ok(out)
}
