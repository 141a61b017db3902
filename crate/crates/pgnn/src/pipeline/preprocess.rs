//! Real-image preprocessing: ROI crop, Gaussian blur, resize, train-time
//! augmentation, and normalization.

use crate::error::{Error, Result};
use crate::field::RgbImage;
use crate::nn::Tensor4;
use crate::rng::Prng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Absolute crop rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiRect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// Geometry and augmentation settings for real-image pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub roi: RoiRect,
    pub blur_kernel: usize,
    pub blur_sigma: f64,
    /// Output (height, width).
    pub resize: (usize, usize),
    pub flip_p: f64,
    /// Train-time rotation is uniform in [0, max_rotation_deg).
    pub max_rotation_deg: f64,
    pub norm_mean: f32,
    pub norm_std: f32,
}

impl PreprocessConfig {
    /// The cucumber-protocol geometry: 110x350 ROI, blur 5/1.0, 224x224.
    pub fn cucumber(top: usize, left: usize) -> Self {
        PreprocessConfig {
            roi: RoiRect {
                top,
                left,
                height: 110,
                width: 350,
            },
            blur_kernel: 5,
            blur_sigma: 1.0,
            resize: (224, 224),
            flip_p: 0.5,
            max_rotation_deg: 360.0,
            norm_mean: 0.5,
            norm_std: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blur_kernel.is_multiple_of(2) || self.blur_kernel == 0 {
            return Err(Error::param("blur kernel must be odd and positive"));
        }
        if self.resize.0 == 0 || self.resize.1 == 0 {
            return Err(Error::param("resize target must be positive"));
        }
        if !(0.0..=1.0).contains(&self.flip_p) {
            return Err(Error::param("flip probability must be in [0,1]"));
        }
        Ok(())
    }
}

/// Converts an 8-bit image to a `[1, 3, h, w]` float tensor in `[0, 1]`.
pub fn rgb_to_tensor(img: &RgbImage) -> Tensor4<f32> {
    Tensor4::from_fn([1, 3, img.height(), img.width()], |_, c, i, j| {
        img.get(i, j)[c] as f32 / 255.0
    })
}

fn crop(x: &Tensor4<f32>, roi: &RoiRect) -> Result<Tensor4<f32>> {
    let [_, c, h, w] = x.dims();
    if roi.top + roi.height > h || roi.left + roi.width > w {
        return Err(Error::dim(format!(
            "ROI {}x{}+{},{} out of bounds for {h}x{w}",
            roi.height, roi.width, roi.top, roi.left
        )));
    }
    Ok(Tensor4::from_fn(
        [1, c, roi.height, roi.width],
        |_, ch, i, j| x.at(0, ch, roi.top + i, roi.left + j),
    ))
}

/// Separable Gaussian blur with clamp-to-edge padding (constants stay
/// exactly constant).
fn gaussian_blur(x: &Tensor4<f32>, kernel: usize, sigma: f64) -> Tensor4<f32> {
    let radius = (kernel / 2) as isize;
    let mut weights = Vec::with_capacity(kernel);
    for k in 0..kernel {
        let d = k as f64 - radius as f64;
        weights.push((-d * d / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = weights.iter().sum();
    let weights: Vec<f32> = weights.iter().map(|w| (w / sum) as f32).collect();

    let [_, c, h, w] = x.dims();
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    // Horizontal pass then vertical pass.
    let mut mid = Tensor4::zeros(x.dims());
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0f32;
                for (k, wt) in weights.iter().enumerate() {
                    let jj = clamp(j as isize + k as isize - radius, w);
                    acc += wt * x.at(0, ch, i, jj);
                }
                mid.set(0, ch, i, j, acc);
            }
        }
    }
    let mut out = Tensor4::zeros(x.dims());
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0f32;
                for (k, wt) in weights.iter().enumerate() {
                    let ii = clamp(i as isize + k as isize - radius, h);
                    acc += wt * mid.at(0, ch, ii, j);
                }
                out.set(0, ch, i, j, acc);
            }
        }
    }
    out
}

/// Bilinear resize with the half-pixel-center convention.
fn resize_bilinear(x: &Tensor4<f32>, th: usize, tw: usize) -> Tensor4<f32> {
    let [_, c, h, w] = x.dims();
    let scale_i = h as f32 / th as f32;
    let scale_j = w as f32 / tw as f32;
    Tensor4::from_fn([1, c, th, tw], |_, ch, i, j| {
        let src_i = ((i as f32 + 0.5) * scale_i - 0.5).clamp(0.0, (h - 1) as f32);
        let src_j = ((j as f32 + 0.5) * scale_j - 0.5).clamp(0.0, (w - 1) as f32);
        let i0 = src_i.floor() as usize;
        let j0 = src_j.floor() as usize;
        let i1 = (i0 + 1).min(h - 1);
        let j1 = (j0 + 1).min(w - 1);
        let di = src_i - i0 as f32;
        let dj = src_j - j0 as f32;
        let top = x.at(0, ch, i0, j0) * (1.0 - dj) + x.at(0, ch, i0, j1) * dj;
        let bottom = x.at(0, ch, i1, j0) * (1.0 - dj) + x.at(0, ch, i1, j1) * dj;
        top * (1.0 - di) + bottom * di
    })
}

fn flip_h(x: &Tensor4<f32>) -> Tensor4<f32> {
    let [_, c, h, w] = x.dims();
    Tensor4::from_fn([1, c, h, w], |_, ch, i, j| x.at(0, ch, i, w - 1 - j))
}

fn flip_v(x: &Tensor4<f32>) -> Tensor4<f32> {
    let [_, c, h, w] = x.dims();
    Tensor4::from_fn([1, c, h, w], |_, ch, i, j| x.at(0, ch, h - 1 - i, j))
}

/// Rotation about the image center, bilinear sampling, zero fill outside.
fn rotate(x: &Tensor4<f32>, degrees: f64) -> Tensor4<f32> {
    let [_, c, h, w] = x.dims();
    let theta = degrees.to_radians();
    let (sin, cos) = (theta.sin() as f32, theta.cos() as f32);
    let (ci, cj) = ((h as f32 - 1.0) / 2.0, (w as f32 - 1.0) / 2.0);
    Tensor4::from_fn([1, c, h, w], |_, ch, i, j| {
        let di = i as f32 - ci;
        let dj = j as f32 - cj;
        let src_i = ci + cos * di - sin * dj;
        let src_j = cj + sin * di + cos * dj;
        if src_i < 0.0 || src_j < 0.0 || src_i > (h - 1) as f32 || src_j > (w - 1) as f32 {
            return 0.0;
        }
        let i0 = src_i.floor() as usize;
        let j0 = src_j.floor() as usize;
        let i1 = (i0 + 1).min(h - 1);
        let j1 = (j0 + 1).min(w - 1);
        let fi = src_i - i0 as f32;
        let fj = src_j - j0 as f32;
        let top = x.at(0, ch, i0, j0) * (1.0 - fj) + x.at(0, ch, i0, j1) * fj;
        let bottom = x.at(0, ch, i1, j0) * (1.0 - fj) + x.at(0, ch, i1, j1) * fj;
        top * (1.0 - fi) + bottom * fi
    })
}

/// Full preprocessing chain on a `[1, 3, H, W]` tensor in `[0, 1]`:
/// ROI crop, Gaussian blur, bilinear resize, train-only random flips and
/// rotation, then per-channel normalization `(x - mean) / std`.
///
/// Augmentation draws happen in a fixed order (horizontal flip, vertical
/// flip, angle) whenever `train` is set, so the rng stream is stable.
pub fn preprocess_real(
    image: &Tensor4<f32>,
    cfg: &PreprocessConfig,
    rng: &mut Prng,
    train: bool,
) -> Result<Tensor4<f32>> {
    cfg.validate()?;
    let mut t = crop(image, &cfg.roi)?;
    t = gaussian_blur(&t, cfg.blur_kernel, cfg.blur_sigma);
    t = resize_bilinear(&t, cfg.resize.0, cfg.resize.1);
    if train {
        let do_h = rng.random::<f64>() < cfg.flip_p;
        let do_v = rng.random::<f64>() < cfg.flip_p;
        let angle = rng.random_range(0.0..cfg.max_rotation_deg.max(f64::MIN_POSITIVE));
        if do_h {
            t = flip_h(&t);
        }
        if do_v {
            t = flip_v(&t);
        }
        if cfg.max_rotation_deg > 0.0 {
            t = rotate(&t, angle);
        }
    }
    for v in t.data_mut() {
        *v = (*v - cfg.norm_mean) / cfg.norm_std;
    }
    Ok(t)
}
