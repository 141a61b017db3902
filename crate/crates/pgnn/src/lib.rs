//! Physics-guided inverse regression on moisture-diffusion imagery.
//!
//! The crate synthesizes image datasets from Fick's second law, trains an
//! unsupervised physics-constrained inverse network plus a supervised
//! regressor, and benchmarks that two-stage pipeline against direct
//! image-to-label regression across training-set sizes.
//!
//! The short version of the data model: a moisture field `x` on the unit
//! square evolves under `dx/dt = D * laplacian(x)`; an image is a colormap
//! rendering `z = g(x)` plus noise; the label is the moisture integral plus
//! measurement error. The inverse network learns `g⁻¹` from images alone,
//! guided only by the steady-state diffusion prior.
//!
//! ```
//! use pgnn::diffusion::{sample_scenario, solve_fourier, ScenarioRanges};
//! use pgnn::field::{integrate, GridSpec};
//! use pgnn::synth::{render_colormap, ColormapSpec};
//!
//! let grid = GridSpec::new(64, 64)?;
//! let mut rng = pgnn::rng::seeded(7, 0);
//! let scenario = sample_scenario(&mut rng, &ScenarioRanges::default())?;
//! let field = solve_fourier(&scenario, grid)?;
//! let label = integrate(&field)?;
//! let image = render_colormap(&field, &ColormapSpec::default())?;
//! assert!((0.0..=1.0).contains(&label));
//! assert_eq!((image.height(), image.width()), (64, 64));
//! # Ok::<(), pgnn::Error>(())
//! ```

pub mod bench;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod field;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
