//! Grid functions standing in for distributions.
//!
//! A grid function `ξ` acts on a test function by `⟨ξ, φ⟩ = (1/n) Σ ξ(s) φ(s)`.
//! With `ξ = n` at a single point this reproduces `φ` at that point, i.e. the
//! Dirac delta. The forward difference of the delta, `n²` at the center and
//! `-n²` at its successor, pairs to `-n (φ(c+1/n) - φ(c))`, which tends to
//! `-φ'(c)`: the classical sign convention for the distributional derivative.
//!
//! Whether a grid function represents a distribution at all is a statement
//! about every level at once; a single level can only report the magnitude
//! of its pairings, and callers compare those across levels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::TestFunction;
use crate::grid::{Axis, GridFunction, GridLevel};
use crate::sum;

#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    pub gf: GridFunction,
}

impl GridDistribution {
    pub fn new(gf: GridFunction) -> Self {
        Self { gf }
    }

    pub fn level(&self) -> GridLevel {
        self.gf.level()
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Ok(Self::new(self.gf.scale(c)?))
    }
}

fn empty(level: GridLevel, axis: Axis) -> GridFunction {
    match axis {
        Axis::Space => GridFunction::zeros_space(level),
        Axis::Time => GridFunction::sample_time(level, |_| 0.0).expect("finite"),
    }
}

fn with_values(level: GridLevel, axis: Axis, at: f64, entries: &[(usize, f64)]) -> Result<GridDistribution> {
    let base = empty(level, axis);
    let center = base.position_of(at).ok_or(Error::OffGrid(at))?;
    let mut values = base.values().to_vec();
    for &(shift, v) in entries {
        let j = center + shift;
        if j >= values.len() {
            return Err(Error::Invalid(format!(
                "{at} is the last grid point; its successor is off the grid"
            )));
        }
        values[j] = v;
    }
    Ok(GridDistribution::new(GridFunction::new(level, axis, base.offset(), values)?))
}

/// `n` at the grid point `at`, zero elsewhere.
pub fn dirac(level: GridLevel, axis: Axis, at: f64) -> Result<GridDistribution> {
    let n = f64::from(level.n());
    with_values(level, axis, at, &[(0, n)])
}

/// `n/2` at `at` and at its successor: a delta split over two cells.
pub fn split_dirac(level: GridLevel, axis: Axis, at: f64) -> Result<GridDistribution> {
    let half = f64::from(level.n()) / 2.0;
    with_values(level, axis, at, &[(0, half), (1, half)])
}

/// Grid derivative of the delta: `n²` at `at`, `-n²` at the next point.
pub fn dirac_derivative(level: GridLevel, axis: Axis, at: f64) -> Result<GridDistribution> {
    let n = f64::from(level.n());
    with_values(level, axis, at, &[(0, n * n), (1, -n * n)])
}

/// `⟨d, φ⟩ = (1/n) Σ d[k] φ(s_k)`, with the other variable held at `other`.
pub fn pair(d: &GridDistribution, phi: &TestFunction, other: f64) -> Result<f64> {
    let gf = &d.gf;
    let (lo, hi) = (gf.point(0), gf.level().coord(gf.offset() + gf.len() as i64));
    let (slo, shi) = match gf.axis() {
        Axis::Space => phi.support.x,
        Axis::Time => phi.support.t,
    };
    if slo < lo || shi > hi {
        return Err(Error::WindowTooSmall(format!(
            "support [{slo}, {shi}] is not inside the grid range [{lo}, {hi})"
        )));
    }
    let mut terms = Vec::with_capacity(gf.len());
    for (j, v) in gf.values().iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let s = gf.point(j);
        let p = match gf.axis() {
            Axis::Space => phi.value(other, s)?,
            Axis::Time => phi.value(s, other)?,
        };
        terms.push(v * p);
    }
    Ok(sum::sum(terms) / f64::from(gf.level().n()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingDiscrepancy {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub tolerance: f64,
    pub max_discrepancy: f64,
    pub entries: Vec<PairingDiscrepancy>,
}

/// Macroscopic equivalence against a finite family of test functions:
/// equivalent iff every pairing differs by at most `tol`.
pub fn equivalent(
    d1: &GridDistribution,
    d2: &GridDistribution,
    phis: &[TestFunction],
    other: f64,
    tol: f64,
) -> Result<EquivalenceReport> {
    if d1.level() != d2.level() {
        return Err(Error::LevelMismatch(d1.level().n(), d2.level().n()));
    }
    let entries = phis
        .par_iter()
        .enumerate()
        .map(|(index, phi)| {
            let lhs = pair(d1, phi, other)?;
            let rhs = pair(d2, phi, other)?;
            Ok(PairingDiscrepancy {
                index,
                lhs,
                rhs,
                discrepancy: (lhs - rhs).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_discrepancy = entries.iter().map(|e| e.discrepancy).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        equivalent: entries.iter().all(|e| e.discrepancy <= tol),
        tolerance: tol,
        max_discrepancy,
        entries,
    })
}

/// Default separating family: bumps centered at -1, -0.75, ..., 1 with
/// half-widths 0.25 and 0.5 (18 functions).
pub fn default_family() -> Vec<TestFunction> {
    let mut out = Vec::with_capacity(18);
    for width in [0.25, 0.5] {
        for i in -4..=4 {
            out.push(TestFunction::bump_x(f64::from(i) * 0.25, width));
        }
    }
    out
}
