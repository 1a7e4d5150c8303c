//! Finite-level grid arithmetic.
//!
//! A [`GridLevel`] fixes the discretization parameter `n`; every coordinate on
//! the grid is the index `k` times `1/n`, kept in index form and converted to
//! `f64` only when a value is evaluated. Grid derivative and grid integral are
//! the forward difference quotient and the step-weighted sum, so the discrete
//! fundamental theorem holds exactly up to floating-point rounding.

use std::ops::Range;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{self, NeumaierSum};

/// Default half-width of the spatial window, capped at `n/2` for small levels.
pub const DEFAULT_HALFWIDTH: i64 = 8;

/// The finite surrogate of an infinite level: step `1/n` and a truncated
/// spatial window `[-W, W)` with `W` a multiple of the step and `W <= n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridLevel {
    n: u32,
    halfwidth_steps: i64,
}

impl GridLevel {
    /// Level `n` with the default window `min(8, n/2)` (rounded down to the grid,
    /// and at least one cell).
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Grid("n must be positive".into()));
        }
        let n64 = i64::from(n);
        let steps = (DEFAULT_HALFWIDTH * n64).min(n64 * n64 / 2).max(1);
        Self::from_steps(n, steps)
    }

    /// Level `n` with an explicit window half-width.
    pub fn with_halfwidth(n: u32, halfwidth: Ratio<i64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Grid("n must be positive".into()));
        }
        let steps = halfwidth * i64::from(n);
        if !steps.is_integer() {
            return Err(Error::Grid(format!(
                "half-width {halfwidth} is not a multiple of 1/{n}"
            )));
        }
        Self::from_steps(n, steps.to_integer())
    }

    /// Like [`GridLevel::with_halfwidth`] for a decimal half-width; it must be
    /// an exact multiple of `1/n`.
    pub fn with_halfwidth_f64(n: u32, halfwidth: f64) -> Result<Self> {
        let steps = halfwidth * f64::from(n);
        if !steps.is_finite() || steps.fract() != 0.0 {
            return Err(Error::Grid(format!(
                "half-width {halfwidth} is not a multiple of 1/{n}"
            )));
        }
        Self::from_steps(n, steps as i64)
    }

    fn from_steps(n: u32, halfwidth_steps: i64) -> Result<Self> {
        let n64 = i64::from(n);
        if halfwidth_steps <= 0 {
            return Err(Error::Grid("spatial half-width must be positive".into()));
        }
        // W <= n/2  <=>  W*n <= n^2/2; level 1 still gets one cell each side
        if 2 * halfwidth_steps > (n64 * n64).max(2) {
            return Err(Error::Grid(format!(
                "spatial half-width {}/{n} exceeds n/2",
                halfwidth_steps
            )));
        }
        Ok(Self { n, halfwidth_steps })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn step(&self) -> Ratio<i64> {
        Ratio::new(1, i64::from(self.n))
    }

    pub fn step_f64(&self) -> f64 {
        1.0 / f64::from(self.n)
    }

    pub fn halfwidth(&self) -> Ratio<i64> {
        Ratio::new(self.halfwidth_steps, i64::from(self.n))
    }

    pub fn halfwidth_f64(&self) -> f64 {
        self.coord(self.halfwidth_steps)
    }

    /// Half-width of the window measured in grid steps.
    pub fn halfwidth_steps(&self) -> i64 {
        self.halfwidth_steps
    }

    /// Coordinate of grid index `k`, i.e. `k/n` rounded once.
    #[inline]
    pub fn coord(&self, k: i64) -> f64 {
        k as f64 / f64::from(self.n)
    }

    /// Index of `x` if it is exactly a grid point.
    pub fn index_of(&self, x: f64) -> Option<i64> {
        let k = (x * f64::from(self.n)).round();
        if !k.is_finite() {
            return None;
        }
        let k = k as i64;
        (self.coord(k) == x).then_some(k)
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid { level: *self }
    }

    pub fn spatial_grid(&self) -> SpatialGrid {
        SpatialGrid { level: *self }
    }
}

/// The time grid `t_k = k/n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    pub level: GridLevel,
}

impl TimeGrid {
    pub fn len(&self) -> usize {
        self.level.n as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, k: usize) -> f64 {
        self.level.coord(k as i64)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }
}

/// The spatial window `[-W, W)` sampled at `x_i = i/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialGrid {
    pub level: GridLevel,
}

impl SpatialGrid {
    /// Grid index of the leftmost point, `-W*n`.
    pub fn first_index(&self) -> i64 {
        -self.level.halfwidth_steps
    }

    pub fn len(&self) -> usize {
        2 * self.level.halfwidth_steps as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, j: usize) -> f64 {
        self.level.coord(self.first_index() + j as i64)
    }

    /// Position in the window of the point at `x`, if `x` is on the grid and
    /// inside the window.
    pub fn position_of(&self, x: f64) -> Option<usize> {
        let k = self.level.index_of(x)?;
        let j = k - self.first_index();
        (0..self.len() as i64).contains(&j).then_some(j as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Time,
    Space,
}

/// Values on consecutive grid points `offset/n, (offset+1)/n, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    level: GridLevel,
    axis: Axis,
    offset: i64,
    values: Vec<f64>,
}

impl GridFunction {
    /// Builds a grid function starting at grid index `offset`. Every value must
    /// be finite.
    pub fn new(level: GridLevel, axis: Axis, offset: i64, values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                point: level.coord(offset + k as i64),
                value: values[k],
            });
        }
        Ok(Self {
            level,
            axis,
            offset,
            values,
        })
    }

    /// Restriction of `f` to the time grid `[0,1]`.
    pub fn sample_time(level: GridLevel, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = level.time_grid();
        Self::new(level, Axis::Time, 0, grid.points().map(f).collect())
    }

    /// Restriction of `f` to the spatial window.
    pub fn sample_space(level: GridLevel, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = level.spatial_grid();
        let values = (0..grid.len()).map(|j| f(grid.point(j))).collect();
        Self::new(level, Axis::Space, grid.first_index(), values)
    }

    pub fn zeros_space(level: GridLevel) -> Self {
        let grid = level.spatial_grid();
        Self {
            level,
            axis: Axis::Space,
            offset: grid.first_index(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn level(&self) -> GridLevel {
        self.level
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Grid index of the first value.
    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinate of the `j`-th value.
    pub fn point(&self, j: usize) -> f64 {
        self.level.coord(self.offset + j as i64)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|j| self.point(j))
    }

    /// Position of the grid point `x` among this function's points.
    pub fn position_of(&self, x: f64) -> Option<usize> {
        let k = self.level.index_of(x)?;
        let j = k - self.offset;
        (0..self.len() as i64).contains(&j).then_some(j as usize)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(
            self.level,
            self.axis,
            self.offset,
            self.values.iter().map(|v| c * v).collect(),
        )
    }

    /// Pointwise combination with a function on the same points.
    pub fn zip_with(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.level != other.level {
            return Err(Error::LevelMismatch(self.level.n, other.level.n));
        }
        if self.axis != other.axis || self.offset != other.offset || self.len() != other.len() {
            return Err(Error::Grid("grid functions live on different points".into()));
        }
        Self::new(
            self.level,
            self.axis,
            self.offset,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| op(*a, *b))
                .collect(),
        )
    }

    /// `x -> I_[first, x)[f]`, defined on this function's points plus the one
    /// after the last.
    pub fn integral_function(&self) -> GridFunction {
        let mut acc = NeumaierSum::new();
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(0.0);
        let n = f64::from(self.level.n);
        for v in &self.values {
            acc.add(*v);
            out.push(acc.value() / n);
        }
        GridFunction {
            level: self.level,
            axis: self.axis,
            offset: self.offset,
            values: out,
        }
    }
}

/// Forward difference quotient `(f[k+1] - f[k]) * n`; one point shorter than
/// the input since the last point has no successor on the grid.
pub fn grid_derivative(f: &GridFunction) -> Result<GridFunction> {
    if f.len() < 2 {
        return Err(Error::DerivativeUndefined(f.len()));
    }
    let n = f64::from(f.level.n);
    let values = f.values.windows(2).map(|w| (w[1] - w[0]) * n).collect();
    GridFunction::new(f.level, f.axis, f.offset, values)
}

/// `step * sum(f[k] for k in range)`. An empty range integrates to zero.
pub fn grid_integral(f: &GridFunction, range: Range<usize>) -> Result<f64> {
    if range.start > range.end || range.end > f.len() {
        return Err(Error::Range {
            start: range.start,
            end: range.end,
            len: f.len(),
        });
    }
    Ok(sum::sum(f.values[range].iter().copied()) / f64::from(f.level.n))
}

/// Both sides of `I_[x,y)[Δf/Δt] = f(y) - f(x)`.
pub fn fundamental_theorem_check(f: &GridFunction, x_idx: usize, y_idx: usize) -> Result<(f64, f64)> {
    if x_idx >= y_idx || y_idx >= f.len() {
        return Err(Error::Range {
            start: x_idx,
            end: y_idx,
            len: f.len(),
        });
    }
    let df = grid_derivative(f)?;
    let lhs = grid_integral(&df, x_idx..y_idx)?;
    let rhs = f.values[y_idx] - f.values[x_idx];
    Ok((lhs, rhs))
}

/// Level-indexed approximations of an integral plus a convergence verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowEstimate {
    pub levels: Vec<u32>,
    pub values: Vec<f64>,
    pub estimate: f64,
    pub converged: bool,
    /// Largest pairwise difference among the last three level values.
    pub spread: f64,
    pub tolerance: f64,
}

impl ShadowEstimate {
    pub fn from_values(levels: Vec<u32>, values: Vec<f64>, tolerance: f64) -> Self {
        let tail = &values[values.len().saturating_sub(3)..];
        let mut spread = 0.0_f64;
        for (i, a) in tail.iter().enumerate() {
            for b in &tail[i + 1..] {
                spread = spread.max((a - b).abs());
            }
        }
        let estimate = *values.last().unwrap_or(&f64::NAN);
        Self {
            levels,
            values,
            estimate,
            converged: spread <= tolerance,
            spread,
            tolerance,
        }
    }
}

/// Sum `(1/n) * Σ f(k/n)` over the grid points of `[a, b)` at each level.
///
/// For Riemann-integrable `f` the estimate approaches the classical integral.
/// For functions that are not Riemann integrable the per-level value depends
/// on which points the chosen grids hit: the indicator of the rationals is 1
/// at every grid point and so "integrates" to `b - a` here, whereas a level
/// sequence avoiding rational points would give another answer. The estimate
/// records only what the supplied levels produce.
pub fn alpha_integral(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    levels: &[u32],
    tol: f64,
) -> Result<ShadowEstimate> {
    if levels.len() < 3 {
        return Err(Error::Invalid("need at least 3 levels".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] == 0 {
        return Err(Error::Invalid("levels must be positive and strictly increasing".into()));
    }
    if !(a <= b) {
        return Err(Error::Invalid(format!("empty or invalid domain [{a}, {b})")));
    }
    let mut values = Vec::with_capacity(levels.len());
    for &n in levels {
        let nf = f64::from(n);
        let first = (a * nf).ceil() as i64;
        let end = (b * nf).ceil() as i64;
        let mut acc = NeumaierSum::new();
        for k in first..end {
            let x = k as f64 / nf;
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { point: x, value: v });
            }
            acc.add(v);
        }
        values.push(acc.value() / nf);
    }
    Ok(ShadowEstimate::from_values(levels.to_vec(), values, tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(n: u32) -> GridLevel {
        GridLevel::new(n).unwrap()
    }

    #[test]
    fn level_invariants() {
        let l = level(16);
        assert_eq!(l.step() * 16, Ratio::from_integer(1));
        assert_eq!(l.halfwidth(), Ratio::from_integer(8));
        // default window shrinks to n/2 at small levels
        assert_eq!(level(8).halfwidth(), Ratio::from_integer(4));
        assert_eq!(level(3).halfwidth(), Ratio::new(4, 3));
        assert!(GridLevel::with_halfwidth(4, Ratio::new(1, 3)).is_err());
        assert!(GridLevel::with_halfwidth(4, Ratio::from_integer(3)).is_err());
        assert!(GridLevel::new(0).is_err());
    }

    #[test]
    fn time_grid_steps_are_exact() {
        let g = level(10).time_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(10), 1.0);
        assert_eq!(level(10).index_of(0.3), Some(3));
        assert_eq!(level(10).index_of(0.35), None);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let f = GridFunction::sample_time(level(8), |_| 3.5).unwrap();
        let d = grid_derivative(&f).unwrap();
        assert_eq!(d.len(), 8);
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn derivative_of_identity_is_one() {
        let f = GridFunction::sample_time(level(4), |t| t).unwrap();
        let d = grid_derivative(&f).unwrap();
        assert!(d.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn derivative_of_square() {
        // ((t + 1/4)^2 - t^2) * 4 = 2t + 1/4
        let f = GridFunction::sample_time(level(4), |t| t * t).unwrap();
        let d = grid_derivative(&f).unwrap();
        for (k, v) in d.values().iter().enumerate() {
            let t = k as f64 / 4.0;
            assert_eq!(*v, 2.0 * t + 0.25);
        }
    }

    #[test]
    fn derivative_of_single_point_fails() {
        let l = level(4);
        let f = GridFunction::new(l, Axis::Time, 0, vec![1.0]).unwrap();
        let err = grid_derivative(&f).unwrap_err();
        assert!(err.to_string().contains("derivative undefined"));
    }

    #[test]
    fn integral_examples() {
        let one = GridFunction::sample_time(level(8), |_| 1.0).unwrap();
        assert_eq!(grid_integral(&one, 0..8).unwrap(), 1.0);
        let id = GridFunction::sample_time(level(4), |t| t).unwrap();
        assert_eq!(grid_integral(&id, 0..4).unwrap(), 0.375);
        assert_eq!(grid_integral(&id, 2..2).unwrap(), 0.0);
        assert!(grid_integral(&id, 0..6).is_err());
    }

    #[test]
    fn fundamental_theorem_examples() {
        let f = GridFunction::sample_time(level(8), |t| t * t).unwrap();
        let (lhs, rhs) = fundamental_theorem_check(&f, 0, 8).unwrap();
        assert!((lhs - 1.0).abs() < 1e-15 && rhs == 1.0);
        let (lhs, rhs) = fundamental_theorem_check(&f, 3, 4).unwrap();
        assert!((lhs - rhs).abs() < 1e-15);
        assert!(fundamental_theorem_check(&f, 4, 4).is_err());
    }

    #[test]
    fn integral_function_differentiates_back() {
        let f = GridFunction::sample_time(level(16), |t| (3.0 * t).sin()).unwrap();
        let g = f.integral_function();
        let back = grid_derivative(&g).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn non_finite_values_rejected() {
        assert!(GridFunction::sample_time(level(4), |t| 1.0 / (t - 0.5)).is_err());
    }

    #[test]
    fn alpha_integral_of_one() {
        let s = alpha_integral(|_| 1.0, 0.0, 1.0, &[8, 16, 32], 1e-12).unwrap();
        assert!(s.values.iter().all(|v| *v == 1.0));
        assert!(s.converged);
    }

    #[test]
    fn alpha_integral_of_square() {
        let s = alpha_integral(|x| x * x, 0.0, 1.0, &[64, 128, 256], 1e-2).unwrap();
        assert!((s.estimate - 1.0 / 3.0).abs() <= 1e-2);
        assert!(s.converged);
    }

    #[test]
    fn alpha_integral_of_rational_indicator() {
        // Every grid point is rational, so the indicator is 1 on all of them.
        let indicator = |x: f64| if x.is_finite() { 1.0 } else { 0.0 };
        let s = alpha_integral(indicator, 0.0, 1.0, &[7, 13, 101], 1e-12).unwrap();
        assert_eq!(s.estimate, 1.0);
        assert!(s.converged);
    }

    #[test]
    fn alpha_integral_flags_non_convergence() {
        // Oscillates with the parity of n: no shadow from these levels.
        let s = alpha_integral(|x| if (x * 1024.0) as i64 % 2 == 0 { 2.0 } else { 0.0 }, 0.0, 1.0, &[3, 5, 7], 1e-3)
            .unwrap();
        assert!(!s.converged);
        assert!(alpha_integral(|x| 1.0 / x, 0.0, 1.0, &[4, 8, 16], 1.0).is_err());
        assert!(alpha_integral(|x| x, 0.0, 1.0, &[4, 8], 1.0).is_err());
        assert!(alpha_integral(|x| x, 0.0, 1.0, &[8, 4, 16], 1.0).is_err());
    }
}
