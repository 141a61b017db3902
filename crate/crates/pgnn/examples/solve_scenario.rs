//! Solve one diffusion scenario and render it: sample random boundary
//! conditions, compute the moisture field, compare against the
//! finite-difference oracle, and write the colormapped PNG.

use pgnn::diffusion::interior_sup_distance;
use pgnn::diffusion::{sample_scenario, solve_fd_oracle, solve_fourier, ScenarioRanges};
use pgnn::field::GridSpec;
use pgnn::rng::seeded;
use pgnn::synth::{render_colormap, write_png, ColormapSpec};

fn main() -> pgnn::Result<()> {
    let grid = GridSpec::new(64, 64)?;
    let mut rng = seeded(7, 0);
    let scenario = sample_scenario(&mut rng, &ScenarioRanges::default())?;
    println!("scenario: {scenario:?}");

    let field = solve_fourier(&scenario, grid)?;
    let oracle = solve_fd_oracle(&scenario, grid)?;
    println!(
        "sup-norm distance to the finite-difference oracle (2-px frame): {:.3e}",
        interior_sup_distance(&field, &oracle, 2)
    );

    let image = render_colormap(&field, &ColormapSpec::default())?;
    let out = std::env::temp_dir().join("pgnn_scenario.png");
    write_png(&out, &image)?;
    println!("wrote {}", out.display());
    Ok(())
}
