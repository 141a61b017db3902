//! The moisture-to-RGB transformation and its corruption models.

use crate::error::{Error, Result};
use crate::field::{integrate, MoistureField, RgbImage};
use crate::rng::Prng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Linear two-anchor colormap: each channel is `alpha * x + beta` with
/// `beta = low` and `alpha = high - low`, so moisture 0 renders as `low_rgb`
/// and moisture 1 as `high_rgb`.
///
/// The default anchors are yellow (low moisture) to dark green (high
/// moisture), giving `alpha_R = -255, beta_R = 255`, `alpha_G = -155,
/// beta_G = 255`, `alpha_B = 0, beta_B = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColormapSpec {
    pub low_rgb: [u8; 3],
    pub high_rgb: [u8; 3],
}

impl Default for ColormapSpec {
    fn default() -> Self {
        ColormapSpec {
            low_rgb: [255, 255, 0],
            high_rgb: [0, 100, 0],
        }
    }
}

impl ColormapSpec {
    pub fn alpha(&self, channel: usize) -> f64 {
        self.high_rgb[channel] as f64 - self.low_rgb[channel] as f64
    }

    pub fn beta(&self, channel: usize) -> f64 {
        self.low_rgb[channel] as f64
    }

    /// The red channel must vary with moisture for the map to be invertible.
    pub fn validate(&self) -> Result<()> {
        if self.low_rgb[0] == self.high_rgb[0] {
            return Err(Error::param(
                "colormap red channel must be strictly monotone (low and high anchors equal)",
            ));
        }
        Ok(())
    }
}

/// Rounds half away from zero, the convention that makes rendered images
/// bit-reproducible across implementations. This is `f64::round`.
#[inline]
fn round_half_away(v: f64) -> f64 {
    v.round()
}

/// Renders a moisture field to 8-bit RGB. Field values must already lie in
/// `[0,1]`; out-of-range input is a range error (clip first).
pub fn render_colormap(field: &MoistureField, cm: &ColormapSpec) -> Result<RgbImage> {
    cm.validate()?;
    let g = field.grid();
    let mut pixels = Vec::with_capacity(g.len() * 3);
    for &x in field.values() {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Range(format!(
                "field value {x} outside [0,1]; clip before rendering"
            )));
        }
        for c in 0..3 {
            let v = round_half_away(cm.alpha(c) * x + cm.beta(c)).clamp(0.0, 255.0);
            pixels.push(v as u8);
        }
    }
    RgbImage::new(g.height(), g.width(), pixels)
}

/// Exact pseudo-inverse of the colormap via the red channel:
/// `x = (R - beta_R) / alpha_R`, clipped to `[0,1]`. Used by tests and the
/// analytic baseline.
pub fn invert_colormap(img: &RgbImage, cm: &ColormapSpec) -> MoistureField {
    let grid = crate::field::GridSpec::new_unchecked(img.height(), img.width());
    let (alpha_r, beta_r) = (cm.alpha(0), cm.beta(0));
    let mut f = MoistureField::from_fn(grid, |i, j| {
        let r = img.get(i, j)[0] as f64;
        (r - beta_r) / alpha_r
    });
    f.clip(0.0, 1.0);
    f
}

/// Acquisition-noise and imperfection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Gaussian std applied per pixel to the moisture field.
    pub sigma_field: f64,
    /// Gaussian std applied to the scalar label.
    pub sigma_label: f64,
    /// Inclusive range for the number of stamped circles.
    pub circle_count: [u32; 2],
    /// Inclusive pixel range for circle radii.
    pub circle_radius: [u32; 2],
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            sigma_field: 0.02,
            sigma_label: 0.01,
            circle_count: [3, 7],
            circle_radius: [2, 8],
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_field < 0.0 || self.sigma_label < 0.0 {
            return Err(Error::param("noise std must be >= 0"));
        }
        if self.circle_count[0] > self.circle_count[1]
            || self.circle_radius[0] > self.circle_radius[1]
        {
            return Err(Error::param("circle ranges must satisfy low <= high"));
        }
        Ok(())
    }
}

/// Overwrites random discs with random fill values, simulating visual
/// imperfections. Draw order per circle is fixed: row, column, radius, fill.
/// A pixel belongs to a disc when `di^2 + dj^2 <= r^2` in integer pixel
/// offsets from the center.
pub fn stamp_circles(field: &MoistureField, spec: &NoiseSpec, rng: &mut Prng) -> MoistureField {
    let g = field.grid();
    let (n, m) = (g.height(), g.width());
    let count = if spec.circle_count[0] == spec.circle_count[1] {
        spec.circle_count[0]
    } else {
        rng.random_range(spec.circle_count[0]..=spec.circle_count[1])
    };
    let mut out = field.clone();
    for _ in 0..count {
        let ci = rng.random_range(0..n) as i64;
        let cj = rng.random_range(0..m) as i64;
        let radius = if spec.circle_radius[0] == spec.circle_radius[1] {
            spec.circle_radius[0]
        } else {
            rng.random_range(spec.circle_radius[0]..=spec.circle_radius[1])
        } as i64;
        let fill = rng.random_range(0.0..=1.0);
        let r2 = radius * radius;
        for i in (ci - radius).max(0)..=(ci + radius).min(n as i64 - 1) {
            for j in (cj - radius).max(0)..=(cj + radius).min(m as i64 - 1) {
                let (di, dj) = (i - ci, j - cj);
                if di * di + dj * dj <= r2 {
                    out.set(i as usize, j as usize, fill);
                }
            }
        }
    }
    out
}

/// Adds i.i.d. Gaussian noise per pixel, then clips to `[0,1]`.
pub fn add_field_noise(field: &MoistureField, sigma: f64, rng: &mut Prng) -> Result<MoistureField> {
    if sigma < 0.0 {
        return Err(Error::param(format!("noise std must be >= 0, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    let mut out = field.clone();
    for v in out.values_mut() {
        *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Computes the clean label (the moisture integral of the pre-noise field)
/// and its noisy measurement.
pub fn make_label(field: &MoistureField, sigma_label: f64, rng: &mut Prng) -> Result<(f64, f64)> {
    if sigma_label < 0.0 {
        return Err(Error::param(format!(
            "label noise std must be >= 0, got {sigma_label}"
        )));
    }
    let y_clean = integrate(field)?;
    let normal = Normal::new(0.0, sigma_label).map_err(|e| Error::param(e.to_string()))?;
    let y_noisy = y_clean + normal.sample(rng);
    Ok((y_clean, y_noisy))
}
