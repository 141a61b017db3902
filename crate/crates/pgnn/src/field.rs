//! Grid geometry, scalar moisture fields, the discrete Laplacian, and
//! quadrature.
//!
//! The spatial domain is always the unit square `[0,1] x [0,1]`, sampled on a
//! rectangular `N x M` pixel grid: row index `i` maps to `u = i / (N-1)` and
//! column index `j` to `v = j / (M-1)`. Everything downstream — the diffusion
//! solvers, the data generator, and the physics loss — shares these
//! conventions.

use crate::error::{Error, Result};

/// Minimum grid side for production fields. Tests may construct smaller grids
/// through [`GridSpec::new_unchecked`].
pub const MIN_GRID_SIDE: usize = 8;

/// Rectangular grid over the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    height: usize,
    width: usize,
}

impl GridSpec {
    /// Validated constructor: both sides must be at least [`MIN_GRID_SIDE`].
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height < MIN_GRID_SIDE || width < MIN_GRID_SIDE {
            return Err(Error::dim(format!(
                "grid must be at least {MIN_GRID_SIDE}x{MIN_GRID_SIDE}, got {height}x{width}"
            )));
        }
        Ok(GridSpec { height, width })
    }

    /// Constructor without the production minimum-size check. Sides must
    /// still be >= 2 so the spacings are finite.
    pub fn new_unchecked(height: usize, width: usize) -> Self {
        assert!(height >= 2 && width >= 2, "grid sides must be >= 2");
        GridSpec { height, width }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical spacing along rows (the `u` axis).
    pub fn spacing_u(&self) -> f64 {
        1.0 / (self.height - 1) as f64
    }

    /// Physical spacing along columns (the `v` axis).
    pub fn spacing_v(&self) -> f64 {
        1.0 / (self.width - 1) as f64
    }

    /// `u` coordinate of row `i`.
    pub fn u(&self, i: usize) -> f64 {
        i as f64 * self.spacing_u()
    }

    /// `v` coordinate of column `j`.
    pub fn v(&self, j: usize) -> f64 {
        j as f64 * self.spacing_v()
    }

    /// True for pixels not on the grid border.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.height && j + 1 < self.width
    }

    #[inline]
    pub(crate) fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.height && j < self.width);
        i * self.width + j
    }
}

/// Scalar moisture concentration sampled on a [`GridSpec`], row-major.
///
/// Values are normalized concentrations; generator-produced fields are
/// clipped to `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoistureField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl MoistureField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dim(format!(
                "value count {} does not match grid {}x{}",
                values.len(),
                grid.height(),
                grid.width()
            )));
        }
        Ok(MoistureField { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        MoistureField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Builds a field from a function of the pixel indices `(i, j)`.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.height() {
            for j in 0..grid.width() {
                values.push(f(i, j));
            }
        }
        MoistureField { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Clips every value into `[lo, hi]` in place.
    pub fn clip(&mut self, lo: f64, hi: f64) {
        for v in &mut self.values {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// 8-bit three-channel image, row-major, channels interleaved as RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != height * width * 3 {
            return Err(Error::dim(format!(
                "pixel buffer length {} does not match {height}x{width}x3",
                pixels.len()
            )));
        }
        Ok(RgbImage {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            pixels.extend_from_slice(&rgb);
        }
        RgbImage {
            height,
            width,
            pixels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> [u8; 3] {
        let k = (i * self.width + j) * 3;
        [self.pixels[k], self.pixels[k + 1], self.pixels[k + 2]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, rgb: [u8; 3]) {
        let k = (i * self.width + j) * 3;
        self.pixels[k..k + 3].copy_from_slice(&rgb);
    }
}

/// Five-point discrete Laplacian.
///
/// Interior pixels get the second-difference stencil; border pixels of the
/// output are zero and are not part of the interior (see
/// [`GridSpec::is_interior`]). With `pixel_units` the spacing is 1 in both
/// axes; otherwise each axis uses its physical spacing, so anisotropic grids
/// apply per-axis second differences.
pub fn laplacian5(field: &MoistureField, pixel_units: bool) -> Result<MoistureField> {
    let g = field.grid();
    let (n, m) = (g.height(), g.width());
    if n < 3 || m < 3 {
        return Err(Error::dim(format!(
            "laplacian needs at least a 3x3 grid, got {n}x{m}"
        )));
    }
    if !field.is_finite() {
        return Err(Error::Range("laplacian input must be finite".into()));
    }
    let (inv_hu2, inv_hv2) = if pixel_units {
        (1.0, 1.0)
    } else {
        let hu = g.spacing_u();
        let hv = g.spacing_v();
        (1.0 / (hu * hu), 1.0 / (hv * hv))
    };
    let f = field.values();
    let mut out = vec![0.0; g.len()];
    for i in 1..n - 1 {
        for j in 1..m - 1 {
            let c = f[g.idx(i, j)];
            let duu = f[g.idx(i - 1, j)] - 2.0 * c + f[g.idx(i + 1, j)];
            let dvv = f[g.idx(i, j - 1)] - 2.0 * c + f[g.idx(i, j + 1)];
            out[g.idx(i, j)] = duu * inv_hu2 + dvv * inv_hv2;
        }
    }
    MoistureField::new(g, out)
}

/// Riemann estimate of the moisture integral over the unit square:
/// mean of the samples times the domain area (= 1).
pub fn integrate(field: &MoistureField) -> Result<f64> {
    let values = field.values();
    if values.is_empty() {
        return Err(Error::dim("cannot integrate an empty field"));
    }
    if !field.is_finite() {
        return Err(Error::Range("integrate input must be finite".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Writes a field as little-endian `f32`, row-major, no header. Dimensions
/// travel in the dataset manifest.
pub fn write_raw_field(path: &std::path::Path, field: &MoistureField) -> Result<()> {
    let mut bytes = Vec::with_capacity(field.values().len() * 4);
    for &v in field.values() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Reads a raw field file written by [`write_raw_field`].
pub fn read_raw_field(path: &std::path::Path, grid: GridSpec) -> Result<MoistureField> {
    let bytes = std::fs::read(path)?;
    if bytes.len() != grid.len() * 4 {
        return Err(Error::dim(format!(
            "raw field file {} has {} bytes, expected {} for {}x{}",
            path.display(),
            bytes.len(),
            grid.len() * 4,
            grid.height(),
            grid.width()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    MoistureField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, m: usize) -> GridSpec {
        GridSpec::new_unchecked(n, m)
    }

    #[test]
    fn grid_spec_rejects_small_production_grids() {
        assert!(GridSpec::new(7, 64).is_err());
        assert!(GridSpec::new(64, 7).is_err());
        let g = GridSpec::new(8, 8).unwrap();
        assert!(g.spacing_u() > 0.0 && g.spacing_v() > 0.0);
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let f = MoistureField::constant(grid(10, 12), 3.7);
        let lap = laplacian5(&f, true).unwrap();
        assert!(lap.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_exact_on_bilinear() {
        // 5-point stencil annihilates i*j exactly.
        let f = MoistureField::from_fn(grid(9, 11), |i, j| (i * j) as f64);
        let lap = laplacian5(&f, true).unwrap();
        for i in 1..8 {
            for j in 1..10 {
                assert_eq!(lap.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn laplacian_exact_on_quadratic() {
        // Second difference of i^2 is exactly 2 in pixel units.
        let f = MoistureField::from_fn(grid(9, 9), |i, _| (i * i) as f64);
        let lap = laplacian5(&f, true).unwrap();
        for i in 1..8 {
            for j in 1..8 {
                assert_eq!(lap.get(i, j), 2.0);
            }
        }
        // Border stays zero and is flagged non-interior.
        for j in 0..9 {
            assert_eq!(lap.get(0, j), 0.0);
            assert!(!lap.grid().is_interior(0, j));
        }
    }

    #[test]
    fn laplacian_physical_units_scale_by_spacing() {
        // f = u^2 has continuous Laplacian 2; the stencil is exact on
        // quadratics, so the physical-units output is 2 on the interior.
        let g = grid(17, 33);
        let f = MoistureField::from_fn(g, |i, _| g.u(i) * g.u(i));
        let lap = laplacian5(&f, false).unwrap();
        for i in 1..16 {
            for j in 1..32 {
                assert!((lap.get(i, j) - 2.0).abs() < 1e-9, "{}", lap.get(i, j));
            }
        }
    }

    #[test]
    fn laplacian_rejects_tiny_grids() {
        let f = MoistureField::constant(grid(2, 5), 1.0);
        assert!(matches!(laplacian5(&f, true), Err(Error::Dimension(_))));
    }

    #[test]
    fn integrate_constant() {
        let f = MoistureField::constant(grid(12, 9), 0.7);
        assert!((integrate(&f).unwrap() - 0.7).abs() < 1e-12);
        let z = MoistureField::zeros(grid(8, 8));
        assert_eq!(integrate(&z).unwrap(), 0.0);
    }

    #[test]
    fn integrate_small_grid_mean() {
        // Conceptual 2x2 grid; minimum size relaxed for the unit test.
        let f = MoistureField::new(grid(2, 2), vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(integrate(&f).unwrap(), 0.5);
    }

    #[test]
    fn raw_field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.f32");
        let g = grid(8, 8);
        let f = MoistureField::from_fn(g, |i, j| (i as f64 * 0.013 + j as f64 * 0.007).fract());
        write_raw_field(&path, &f).unwrap();
        let back = read_raw_field(&path, g).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= f32::EPSILON as f64 * a.abs().max(1.0));
        }
        // Wrong grid is a dimension error.
        assert!(read_raw_field(&path, grid(8, 9)).is_err());
    }

    proptest! {
        #[test]
        fn laplacian_is_linear(
            seed in 0u64..1000,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            use rand::Rng;
            let g = grid(8, 8);
            let mut rng = crate::rng::seeded(seed, 0);
            let f = MoistureField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
            let h = MoistureField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
            let combo = MoistureField::new(
                g,
                f.values().iter().zip(h.values()).map(|(x, y)| a * x + b * y).collect(),
            ).unwrap();
            let lap_combo = laplacian5(&combo, true).unwrap();
            let lap_f = laplacian5(&f, true).unwrap();
            let lap_h = laplacian5(&h, true).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    let expect = a * lap_f.get(i, j) + b * lap_h.get(i, j);
                    prop_assert!((lap_combo.get(i, j) - expect).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn laplacian_zero_on_harmonic_lattice_fields(seed in 0u64..1000) {
            use rand::Rng;
            let g = grid(9, 9);
            let mut rng = crate::rng::seeded(seed, 1);
            let (c0, c1) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            // c0 + c1*i*j + (i^2 - j^2) is harmonic on the pixel lattice.
            let f = MoistureField::from_fn(g, |i, j| {
                c0 + c1 * (i * j) as f64 + (i * i) as f64 - (j * j) as f64
            });
            let lap = laplacian5(&f, true).unwrap();
            for i in 1..8 {
                for j in 1..8 {
                    prop_assert!(lap.get(i, j).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn integrate_is_monotone(seed in 0u64..1000) {
            use rand::Rng;
            let g = grid(8, 8);
            let mut rng = crate::rng::seeded(seed, 2);
            let f = MoistureField::from_fn(g, |_, _| rng.random_range(0.0..1.0));
            let gfield = MoistureField::new(
                g,
                f.values().iter().map(|v| v + rng.random_range(0.0..0.5)).collect(),
            ).unwrap();
            prop_assert!(integrate(&f).unwrap() <= integrate(&gfield).unwrap());
        }
    }
}
