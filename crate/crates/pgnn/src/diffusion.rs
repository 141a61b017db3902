//! Fick's-second-law solvers on the unit square.
//!
//! The moisture concentration `x(u, v, t)` obeys `dx/dt = D * (x_uu + x_vv)`
//! with constant Dirichlet values per edge and a uniform interior initial
//! condition. Two independent routes compute it:
//!
//! * [`solve_fourier`] — truncated separation-of-variables solution: the
//!   Laplace steady state for the four edge values plus a double-sine
//!   transient fitted to the initial residual. This is the production path
//!   used by the data generator.
//! * [`solve_fd_oracle`] — explicit forward-Euler stepping. Slow, simple,
//!   and with no shared code besides the grid type; it exists to verify the
//!   Fourier route.
//!
//! Truncated sine series of constant edge data exhibit Gibbs oscillations
//! near the boundary (worst at the corners, where the series vanishes while
//! the Dirichlet data does not). Comparisons between the two routes
//! therefore exclude a two-pixel frame; see `interior_sup_distance`.

use crate::error::{Error, Result};
use crate::field::{GridSpec, MoistureField};
use crate::rng::Prng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Constant Dirichlet moisture value on each edge of the unit square.
///
/// `top` is the row `u = 0`, `bottom` the row `u = 1`, `left` the column
/// `v = 0`, `right` the column `v = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeValues {
    pub top: f64,
    pub bottom: f64,
    pub left: f64,
    pub right: f64,
}

impl EdgeValues {
    pub fn uniform(b: f64) -> Self {
        EdgeValues {
            top: b,
            bottom: b,
            left: b,
            right: b,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.top, self.bottom, self.left, self.right]
    }

    pub fn min(&self) -> f64 {
        self.as_array().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.as_array()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Parameters of one diffusion instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionScenario {
    /// Diffusion coefficient, dimensionless, > 0.
    pub diffusivity: f64,
    /// Dirichlet moisture on the four edges.
    pub edges: EdgeValues,
    /// Uniform interior moisture at `t = 0`.
    pub initial: f64,
    /// Evaluation time, >= 0.
    pub t_eval: f64,
    /// Fourier modes per axis.
    pub modes: usize,
}

impl DiffusionScenario {
    pub fn validate(&self) -> Result<()> {
        if !self.diffusivity.is_finite() || self.diffusivity <= 0.0 {
            return Err(Error::param(format!(
                "diffusivity must be > 0, got {}",
                self.diffusivity
            )));
        }
        if self.modes < 1 {
            return Err(Error::param("modes must be >= 1"));
        }
        if self.t_eval < 0.0 {
            return Err(Error::param(format!(
                "t_eval must be >= 0, got {}",
                self.t_eval
            )));
        }
        for (name, v) in [("initial", self.initial)]
            .into_iter()
            .chain(self.edges.as_array().into_iter().map(|v| ("edge", v)))
        {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!(
                    "{name} moisture must be in [0,1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Uniform sampling ranges for scenario parameters.
///
/// The physical model pins no numeric ranges; these defaults put the edges
/// well below the initial interior moisture so diffusion drains outward, and
/// they are recorded in every dataset manifest for reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRanges {
    pub diffusivity: [f64; 2],
    pub edge: [f64; 2],
    pub initial: [f64; 2],
    pub t_eval: [f64; 2],
    pub modes: usize,
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        ScenarioRanges {
            diffusivity: [0.05, 0.2],
            edge: [0.0, 0.3],
            initial: [0.6, 1.0],
            t_eval: [0.01, 0.5],
            modes: 32,
        }
    }
}

impl ScenarioRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [
            ("diffusivity", self.diffusivity),
            ("edge", self.edge),
            ("initial", self.initial),
            ("t_eval", self.t_eval),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::param(format!("invalid {name} range [{lo}, {hi}]")));
            }
        }
        if self.modes < 1 {
            return Err(Error::param("modes must be >= 1"));
        }
        Ok(())
    }
}

fn draw(rng: &mut Prng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draws one scenario, each parameter uniform and independent.
///
/// Draw order is fixed (diffusivity, top, bottom, left, right, initial,
/// t_eval) so a given rng state always yields the same scenario.
pub fn sample_scenario(rng: &mut Prng, ranges: &ScenarioRanges) -> Result<DiffusionScenario> {
    ranges.validate()?;
    Ok(DiffusionScenario {
        diffusivity: draw(rng, ranges.diffusivity),
        edges: EdgeValues {
            top: draw(rng, ranges.edge),
            bottom: draw(rng, ranges.edge),
            left: draw(rng, ranges.edge),
            right: draw(rng, ranges.edge),
        },
        initial: draw(rng, ranges.initial),
        t_eval: draw(rng, ranges.t_eval),
        modes: ranges.modes,
    })
}

/// `sinh(a) / sinh(b)` for `0 <= a <= b`, computed in exponential form so
/// large-mode terms neither overflow nor lose precision.
fn sinh_ratio(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b > 0.0 && a <= b + 1e-12);
    ((a - b).exp()) * (1.0 - (-2.0 * a).exp()) / (1.0 - (-2.0 * b).exp())
}

/// Sine Fourier coefficient of the constant 1 on (0,1): `2(1-(-1)^m)/(m pi)`.
fn const_sine_coeff(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        0.0
    } else {
        4.0 / (m as f64 * PI)
    }
}

/// Effective per-axis mode count: requested modes capped by what the grid's
/// interior can represent without aliasing.
fn effective_modes(modes: usize, grid: GridSpec) -> usize {
    modes.min(grid.height() - 2).min(grid.width() - 2)
}

/// Truncated Laplace solution for the four constant edge values, unclipped.
///
/// When all four edges share one value the boundary data is continuous and
/// the exact solution is that constant, so the closed form is returned
/// directly instead of its mode-limited series representation.
pub fn steady_state_raw(s: &DiffusionScenario, grid: GridSpec) -> Result<MoistureField> {
    s.validate()?;
    if s.edges.min() == s.edges.max() {
        return Ok(MoistureField::constant(grid, s.edges.top));
    }
    let (n, m) = (grid.height(), grid.width());
    let modes = s.modes;
    // Per-axis tables indexed [mode][pixel].
    let sin_u: Vec<Vec<f64>> = (1..=modes)
        .map(|k| (0..n).map(|i| (k as f64 * PI * grid.u(i)).sin()).collect())
        .collect();
    let sin_v: Vec<Vec<f64>> = (1..=modes)
        .map(|k| (0..m).map(|j| (k as f64 * PI * grid.v(j)).sin()).collect())
        .collect();
    let ratio_at = |k: usize, r: f64| sinh_ratio(k as f64 * PI * r, k as f64 * PI);

    let mut out = MoistureField::zeros(grid);
    // Horizontal edges: along-edge coordinate v, depth coordinate u.
    for i in 0..n {
        let u = grid.u(i);
        // Mode weights for this row from the bottom (u=1) and top (u=0) edges.
        let row_w: Vec<f64> = (1..=modes)
            .map(|k| {
                let c = const_sine_coeff(k);
                c * (s.edges.bottom * ratio_at(k, u) + s.edges.top * ratio_at(k, 1.0 - u))
            })
            .collect();
        for j in 0..m {
            let mut acc = 0.0;
            for (w, sv) in row_w.iter().zip(&sin_v) {
                acc += w * sv[j];
            }
            out.set(i, j, acc);
        }
    }
    // Vertical edges: along-edge coordinate u, depth coordinate v.
    for j in 0..m {
        let v = grid.v(j);
        let col_w: Vec<f64> = (1..=modes)
            .map(|k| {
                let c = const_sine_coeff(k);
                c * (s.edges.right * ratio_at(k, v) + s.edges.left * ratio_at(k, 1.0 - v))
            })
            .collect();
        for i in 0..n {
            let mut acc = 0.0;
            for (w, su) in col_w.iter().zip(&sin_u) {
                acc += w * su[i];
            }
            out.set(i, j, out.get(i, j) + acc);
        }
    }
    Ok(out)
}

/// Steady-state moisture field, clipped to `[0,1]`.
pub fn steady_state(s: &DiffusionScenario, grid: GridSpec) -> Result<MoistureField> {
    let mut f = steady_state_raw(s, grid)?;
    f.clip(0.0, 1.0);
    Ok(f)
}

/// Full time-dependent solution before clipping.
///
/// Steady state plus the double-sine transient: the residual
/// `initial - steady` sampled on the interior grid is expanded in the
/// discrete sine basis (truncated to the scenario's mode count) and each
/// mode decays as `exp(-D pi^2 (m^2 + n^2) t)`.
pub fn solve_fourier_raw(s: &DiffusionScenario, grid: GridSpec) -> Result<MoistureField> {
    let steady = steady_state_raw(s, grid)?;
    let (n, m) = (grid.height(), grid.width());
    let modes = effective_modes(s.modes, grid);

    let sin_u: Vec<Vec<f64>> = (1..=modes)
        .map(|k| (0..n).map(|i| (k as f64 * PI * grid.u(i)).sin()).collect())
        .collect();
    let sin_v: Vec<Vec<f64>> = (1..=modes)
        .map(|k| (0..m).map(|j| (k as f64 * PI * grid.v(j)).sin()).collect())
        .collect();

    // Separable discrete double-sine transform of the initial residual.
    // rows[k][j] = sum_i residual(i,j) sin(k pi u_i), interior i only.
    let mut rows = vec![vec![0.0; m]; modes];
    for i in 1..n - 1 {
        for (row, su) in rows.iter_mut().zip(&sin_u) {
            let su_i = su[i];
            for (j, slot) in row.iter_mut().enumerate().take(m - 1).skip(1) {
                *slot += (s.initial - steady.get(i, j)) * su_i;
            }
        }
    }
    let norm = 4.0 / ((n - 1) as f64 * (m - 1) as f64);
    // coeff[k][l] = B_{k+1, l+1}, already scaled by the decay at t_eval.
    let mut coeff = vec![vec![0.0; modes]; modes];
    let decay_base = -s.diffusivity * PI * PI * s.t_eval;
    for k in 0..modes {
        for (l, sv) in sin_v.iter().enumerate() {
            let mut acc = 0.0;
            for j in 1..m - 1 {
                acc += rows[k][j] * sv[j];
            }
            let m2n2 = ((k + 1) * (k + 1) + (l + 1) * (l + 1)) as f64;
            coeff[k][l] = norm * acc * (decay_base * m2n2).exp();
        }
    }

    // Evaluate: transient[i][j] = sum_k sin_u[k][i] * sum_l coeff[k][l] sin_v[l][j].
    let mut mix = vec![vec![0.0; m]; modes];
    for k in 0..modes {
        for j in 0..m {
            let mut acc = 0.0;
            for l in 0..modes {
                acc += coeff[k][l] * sin_v[l][j];
            }
            mix[k][j] = acc;
        }
    }
    let mut out = steady;
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for (su, mix_row) in sin_u.iter().zip(&mix) {
                acc += su[i] * mix_row[j];
            }
            out.set(i, j, out.get(i, j) + acc);
        }
    }
    Ok(out)
}

/// Moisture field at `t_eval`, clipped to `[0,1]`. Production entry point
/// for the data generator.
pub fn solve_fourier(s: &DiffusionScenario, grid: GridSpec) -> Result<MoistureField> {
    let mut f = solve_fourier_raw(s, grid)?;
    f.clip(0.0, 1.0);
    Ok(f)
}

/// Brute-force verification oracle: explicit forward-Euler stepping from the
/// uniform initial condition with the edges pinned to their Dirichlet
/// values. Step size `0.2 * min(h)^2 / D` sits well under the `h^2 / (4D)`
/// stability limit. Corner pixels take the mean of their two adjacent edges.
pub fn solve_fd_oracle(s: &DiffusionScenario, grid: GridSpec) -> Result<MoistureField> {
    s.validate()?;
    let (n, m) = (grid.height(), grid.width());
    if n < 3 || m < 3 {
        return Err(Error::dim("fd oracle needs at least a 3x3 grid"));
    }
    let hu = grid.spacing_u();
    let hv = grid.spacing_v();

    let mut x = MoistureField::constant(grid, s.initial);
    let pin_edges = |f: &mut MoistureField| {
        for j in 0..m {
            f.set(0, j, s.edges.top);
            f.set(n - 1, j, s.edges.bottom);
        }
        for i in 0..n {
            f.set(i, 0, s.edges.left);
            f.set(i, m - 1, s.edges.right);
        }
        f.set(0, 0, 0.5 * (s.edges.top + s.edges.left));
        f.set(0, m - 1, 0.5 * (s.edges.top + s.edges.right));
        f.set(n - 1, 0, 0.5 * (s.edges.bottom + s.edges.left));
        f.set(n - 1, m - 1, 0.5 * (s.edges.bottom + s.edges.right));
    };
    pin_edges(&mut x);
    if s.t_eval == 0.0 {
        return Ok(x);
    }

    let h2 = hu.min(hv).powi(2);
    let dt_max = 0.2 * h2 / s.diffusivity;
    let steps = (s.t_eval / dt_max).ceil() as usize;
    let dt = s.t_eval / steps as f64;
    let (inv_hu2, inv_hv2) = (1.0 / (hu * hu), 1.0 / (hv * hv));

    let mut next = x.clone();
    for _ in 0..steps {
        for i in 1..n - 1 {
            for j in 1..m - 1 {
                let c = x.get(i, j);
                let lap = (x.get(i - 1, j) - 2.0 * c + x.get(i + 1, j)) * inv_hu2
                    + (x.get(i, j - 1) - 2.0 * c + x.get(i, j + 1)) * inv_hv2;
                next.set(i, j, c + s.diffusivity * dt * lap);
            }
        }
        std::mem::swap(&mut x, &mut next);
    }
    pin_edges(&mut x);
    Ok(x)
}

/// Sup-norm distance between two fields over the interior that excludes a
/// `frame`-pixel border. Truncated sine series cannot match pointwise
/// Dirichlet data on the frame itself (Gibbs ringing, vanishing corners), so
/// solver comparisons use `frame = 2`.
pub fn interior_sup_distance(a: &MoistureField, b: &MoistureField, frame: usize) -> f64 {
    assert_eq!(a.grid(), b.grid(), "fields must share a grid");
    let g = a.grid();
    let mut sup = 0.0f64;
    for i in frame..g.height().saturating_sub(frame) {
        for j in frame..g.width().saturating_sub(frame) {
            sup = sup.max((a.get(i, j) - b.get(i, j)).abs());
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{integrate, laplacian5};
    use crate::rng::seeded;

    fn grid64() -> GridSpec {
        GridSpec::new(64, 64).unwrap()
    }

    fn scenario(d: f64, edges: EdgeValues, x0: f64, t: f64, modes: usize) -> DiffusionScenario {
        DiffusionScenario {
            diffusivity: d,
            edges,
            initial: x0,
            t_eval: t,
            modes,
        }
    }

    #[test]
    fn degenerate_ranges_sample_exactly() {
        let ranges = ScenarioRanges {
            diffusivity: [0.1, 0.1],
            edge: [0.2, 0.2],
            initial: [0.9, 0.9],
            t_eval: [0.3, 0.3],
            modes: 8,
        };
        let s = sample_scenario(&mut seeded(0, 0), &ranges).unwrap();
        assert_eq!(s.diffusivity, 0.1);
        assert_eq!(s.edges.as_array(), [0.2; 4]);
        assert_eq!(s.initial, 0.9);
        assert_eq!(s.t_eval, 0.3);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let ranges = ScenarioRanges::default();
        let a = sample_scenario(&mut seeded(7, 0), &ranges).unwrap();
        let b = sample_scenario(&mut seeded(7, 0), &ranges).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn diffusivity_sample_mean_matches_range_midpoint() {
        // Law of large numbers, checked by direct simulation.
        let ranges = ScenarioRanges::default();
        let mut rng = seeded(123, 0);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| sample_scenario(&mut rng, &ranges).unwrap().diffusivity)
            .sum::<f64>()
            / n as f64;
        assert!(
            (mean - 0.125).abs() < 0.005,
            "sample mean {mean} too far from 0.125"
        );
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut s = scenario(0.1, EdgeValues::uniform(0.1), 0.8, 0.1, 32);
        s.modes = 0;
        assert!(matches!(
            steady_state(&s, grid64()),
            Err(Error::Parameter(_))
        ));
        let mut s2 = scenario(0.1, EdgeValues::uniform(0.1), 0.8, 0.1, 32);
        s2.t_eval = -1.0;
        assert!(matches!(
            solve_fourier(&s2, grid64()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn steady_state_zero_edges_is_zero() {
        let s = scenario(0.1, EdgeValues::uniform(0.0), 0.8, 0.1, 32);
        let f = steady_state(&s, grid64()).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn steady_state_uniform_edges_is_exactly_constant() {
        // Continuous boundary data: the constant is the unique bounded
        // solution and the solver returns it in closed form.
        let b = 0.25;
        let s = scenario(0.1, EdgeValues::uniform(b), b, 0.0, 1);
        let f = steady_state(&s, grid64()).unwrap();
        assert!(f.values().iter().all(|&v| v == b));
    }

    #[test]
    fn steady_state_series_close_to_constant_when_edges_nearly_equal() {
        // Non-uniform edges exercise the series path; with three edges at b
        // and one infinitesimally off, the interior stays near b.
        let b = 0.25;
        let edges = EdgeValues {
            top: b + 1e-9,
            bottom: b,
            left: b,
            right: b,
        };
        let s = scenario(0.1, edges, b, 0.0, 32);
        let f = steady_state(&s, grid64()).unwrap();
        let constant = MoistureField::constant(grid64(), b);
        let sup = interior_sup_distance(&f, &constant, 4);
        assert!(sup < 2e-3, "sup distance to constant: {sup}");
    }

    #[test]
    fn steady_state_is_discretely_harmonic() {
        // Harmonicity check via laplacian5 in pixel-stencil units (the same
        // units the physics loss uses): interior RMS <= 1e-3 excluding a
        // 2-pixel frame. Measured worst over seeded scenarios is ~1.5e-4;
        // the bound cannot hold in physical units because modes near the
        // grid Nyquist carry an O((m*pi*h)^4 / h^2) stencil residual.
        let mut rng = seeded(11, 0);
        let ranges = ScenarioRanges::default();
        for _ in 0..10 {
            let mut s = sample_scenario(&mut rng, &ranges).unwrap();
            s.modes = 32;
            let f = steady_state_raw(&s, grid64()).unwrap();
            let lap = laplacian5(&f, true).unwrap();
            let g = f.grid();
            let mut sum2 = 0.0;
            let mut count = 0usize;
            for i in 2..g.height() - 2 {
                for j in 2..g.width() - 2 {
                    sum2 += lap.get(i, j).powi(2);
                    count += 1;
                }
            }
            let rms = (sum2 / count as f64).sqrt();
            assert!(rms <= 1e-3, "laplacian RMS {rms} too large");
        }
    }

    #[test]
    fn fourier_constant_scenario_is_constant_for_all_t() {
        // Uniform edges give the exact constant steady state, and the
        // initial residual is identically zero, so the solution is the
        // constant to machine precision at every pixel and time.
        let b = 0.2;
        for t in [0.0, 0.05, 0.5, 5.0] {
            let s = scenario(0.1, EdgeValues::uniform(b), b, t, 32);
            let f = solve_fourier(&s, grid64()).unwrap();
            let sup = f
                .values()
                .iter()
                .map(|v| (v - b).abs())
                .fold(0.0f64, f64::max);
            assert!(sup <= 1e-12, "t={t}: sup distance to constant {sup}");
        }
    }

    #[test]
    fn fourier_long_time_matches_steady_state() {
        // Transient bound exp(-2 D pi^2 t) at t=50, D=0.1 is ~1e-43.
        let s = scenario(
            0.1,
            EdgeValues {
                top: 0.1,
                bottom: 0.3,
                left: 0.0,
                right: 0.2,
            },
            0.8,
            50.0,
            32,
        );
        let f = solve_fourier(&s, grid64()).unwrap();
        let steady = steady_state(&s, grid64()).unwrap();
        let sup = f
            .values()
            .iter()
            .zip(steady.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup <= 1e-6, "sup {sup}");
    }

    #[test]
    fn fourier_matches_fd_oracle_on_reference_scenario() {
        let s = scenario(0.1, EdgeValues::uniform(0.1), 0.8, 0.05, 32);
        let fourier = solve_fourier(&s, grid64()).unwrap();
        let fd = solve_fd_oracle(&s, grid64()).unwrap();
        let sup = interior_sup_distance(&fourier, &fd, 2);
        assert!(sup <= 2e-2, "sup-norm distance {sup}");
    }

    #[test]
    fn fd_oracle_t_zero_is_initial_condition() {
        let s = scenario(0.1, EdgeValues::uniform(0.2), 0.7, 0.0, 32);
        let f = solve_fd_oracle(&s, grid64()).unwrap();
        let g = f.grid();
        for i in 0..g.height() {
            for j in 0..g.width() {
                if g.is_interior(i, j) {
                    assert_eq!(f.get(i, j), 0.7);
                }
            }
        }
        assert_eq!(f.get(0, 5), 0.2);
        assert_eq!(f.get(5, 0), 0.2);
    }

    #[test]
    fn fd_oracle_constant_scenario_stays_constant() {
        let s = scenario(0.15, EdgeValues::uniform(0.4), 0.4, 0.3, 32);
        let f = solve_fd_oracle(&s, grid64()).unwrap();
        for &v in f.values() {
            assert!((v - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn fd_oracle_long_time_reaches_steady_state() {
        // The stepper's fixed point is the steady state.
        let s = scenario(
            0.1,
            EdgeValues {
                top: 0.1,
                bottom: 0.2,
                left: 0.05,
                right: 0.3,
            },
            0.9,
            50.0,
            32,
        );
        let g = grid64();
        let fd = solve_fd_oracle(&s, g).unwrap();
        let steady = steady_state(&s, g).unwrap();
        // Six pixels in, both the series truncation and the stepper's
        // spatial discretization error are below 1e-4 (measured 6.5e-5);
        // closer to the edges the two routes represent the Dirichlet data
        // differently (truncated sine series vs pinned pixels).
        let sup = interior_sup_distance(&fd, &steady, 6);
        assert!(sup <= 1e-4, "sup {sup}");
    }

    #[test]
    fn maximum_principle_with_truncation_slack() {
        // Pre-clipping values stay within the data range plus truncation
        // slack tau. The outermost pixel ring is excluded: the truncated
        // sine series vanishes at the corners regardless of the edge data,
        // so the principle can only hold from the first interior ring in
        // (measured worst escape there is ~1.3e-2, well under tau).
        let ranges = ScenarioRanges::default();
        let mut rng = seeded(21, 0);
        let tau = 0.05;
        let g = grid64();
        for _ in 0..20 {
            let s = sample_scenario(&mut rng, &ranges).unwrap();
            let raw = solve_fourier_raw(&s, g).unwrap();
            let lo = s.edges.min().min(s.initial) - tau;
            let hi = s.edges.max().max(s.initial) + tau;
            let mut worst_lo = f64::INFINITY;
            let mut worst_hi = f64::NEG_INFINITY;
            for i in 1..g.height() - 1 {
                for j in 1..g.width() - 1 {
                    worst_lo = worst_lo.min(raw.get(i, j));
                    worst_hi = worst_hi.max(raw.get(i, j));
                }
            }
            assert!(
                worst_lo >= lo && worst_hi <= hi,
                "values [{worst_lo}, {worst_hi}] escape [{lo}, {hi}] for {s:?}"
            );
        }
    }

    #[test]
    fn moisture_integral_decays_in_time() {
        let ranges = ScenarioRanges::default();
        let mut rng = seeded(31, 0);
        for _ in 0..5 {
            let mut s = sample_scenario(&mut rng, &ranges).unwrap();
            assert!(s.initial > s.edges.max());
            let mut last = f64::INFINITY;
            for t in [0.01, 0.05, 0.1, 0.25, 0.5] {
                s.t_eval = t;
                let y = integrate(&solve_fourier(&s, grid64()).unwrap()).unwrap();
                assert!(
                    y <= last + 1e-9,
                    "integral rose from {last} to {y} at t={t}"
                );
                last = y;
            }
        }
    }
}
