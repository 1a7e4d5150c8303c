use serde::{Deserialize, Serialize};

use super::{solve_grid_ode, CauchyProblem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceStep {
    pub k: usize,
    pub t: f64,
    pub gap: f64,
    /// `|x0 - x1| e^{L (t - t0)}`
    pub bound: f64,
    /// `|x0 - x1| (1 + L/n)^{n (t - t0)}`, never larger than `bound`
    pub discrete_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub lipschitz: f64,
    pub t1: f64,
    pub steps: Vec<DependenceStep>,
    pub max_gap: f64,
    pub holds: bool,
    /// First grid index where the gap exceeds the bound; a sign that `L` is
    /// not a Lipschitz constant of the drift on the visited range.
    pub first_violation: Option<usize>,
}

/// Compares the deterministic solutions from `x0` and `x1` against the
/// Grönwall bound `|x0 - x1| e^{L t}` at every grid time up to `t1`.
pub fn continuous_dependence_check(
    problem: &CauchyProblem,
    x0: f64,
    x1: f64,
    lipschitz: f64,
    t1: f64,
) -> Result<DependenceReport> {
    if !(lipschitz >= 0.0) {
        return Err(Error::Invalid(format!("Lipschitz constant {lipschitz} must be non-negative")));
    }
    let level = problem.level;
    let n = level.n() as usize;
    let a = solve_grid_ode(&problem.with_x0(x0), None)?;
    let b = solve_grid_ode(&problem.with_x0(x1), None)?;
    let d0 = (x0 - x1).abs();
    let t0 = level.coord(problem.start as i64);
    let growth = 1.0 + lipschitz / f64::from(level.n());
    let mut steps = Vec::new();
    let mut first_violation = None;
    let mut max_gap = 0.0f64;
    for k in problem.start..=n {
        let t = level.coord(k as i64);
        if t > t1 {
            break;
        }
        let gap = (a.at(k) - b.at(k)).abs();
        let bound = d0 * (lipschitz * (t - t0)).exp();
        let discrete_bound = d0 * growth.powi((k - problem.start) as i32);
        // rounding slack proportional to the magnitudes involved
        let slack = 8.0 * f64::EPSILON * (a.at(k).abs() + b.at(k).abs());
        if gap > bound + slack && first_violation.is_none() {
            first_violation = Some(k);
        }
        max_gap = max_gap.max(gap);
        steps.push(DependenceStep {
            k,
            t,
            gap,
            bound,
            discrete_bound,
        });
    }
    Ok(DependenceReport {
        lipschitz,
        t1,
        steps,
        max_gap,
        holds: first_violation.is_none(),
        first_violation,
    })
}
