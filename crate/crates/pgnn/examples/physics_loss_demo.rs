//! The physics loss by example: harmonic fields are free, curvature and
//! noise are charged.

use pgnn::nn::Tensor4;
use pgnn::pipeline::physics_loss;
use pgnn::rng::seeded;
use rand::Rng;

fn main() -> pgnn::Result<()> {
    // A constant field solves the steady-state diffusion equation exactly.
    let constant = Tensor4::new([1, 3, 16, 16], vec![0.5f64; 3 * 256])?;
    println!("constant field:  {:.3e}", physics_loss(&constant)?);

    // Bilinear ramps are discretely harmonic too.
    let ramp = Tensor4::from_fn([1, 3, 16, 16], |_, _, i, j| 0.01 * (i * j) as f64);
    println!("bilinear ramp:   {:.3e}", physics_loss(&ramp)?);

    // Quadratic curvature has residual 2 per interior pixel on one channel:
    // squared and averaged over three channels that is 4/3.
    let quad = Tensor4::from_fn(
        [1, 3, 16, 16],
        |_, c, i, _| if c == 0 { (i * i) as f64 } else { 0.0 },
    );
    println!("quadratic bump:  {:.6}", physics_loss(&quad)?);

    // Pixel noise is heavily charged, which is what drives the inverse
    // network toward smooth moisture fields.
    let mut rng = seeded(1, 0);
    let noisy = Tensor4::from_fn([1, 3, 16, 16], |_, _, _, _| rng.random_range(0.0..1.0));
    println!("uniform noise:   {:.3}", physics_loss(&noisy)?);
    Ok(())
}
