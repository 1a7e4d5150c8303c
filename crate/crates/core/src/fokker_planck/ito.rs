use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::TestFunction;
use crate::sde::{CauchyProblem, Trajectory};

/// Residual of the discrete chain rule
///
/// ```text
/// r(t_k) = Δφ(t, x(t))/Δt - [φ_t + φ_x v + (ε/2) φ_xx v²],   v = Δx/Δt
/// ```
///
/// for `k` from the start index up to `n - 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoReport {
    pub n: u32,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub max_velocity: f64,
    /// `n^{2/3}`, the admissible growth of `|Δx/Δt|`.
    pub velocity_threshold: f64,
    pub hypothesis_violated: bool,
}

pub fn ito_residual(phi: &TestFunction, trajectory: &Trajectory, problem: &CauchyProblem) -> Result<ItoReport> {
    if trajectory.level != problem.level {
        return Err(Error::LevelMismatch(trajectory.level.n(), problem.level.n()));
    }
    let level = trajectory.level;
    let n = level.n();
    let eps = level.step_f64();
    let last = (n as usize).saturating_sub(1);
    let mut residuals = Vec::with_capacity(last.saturating_sub(trajectory.start));
    let mut max_velocity = 0.0f64;
    for k in trajectory.start..last {
        let (t, t1) = (level.coord(k as i64), level.coord(k as i64 + 1));
        let (x, x1) = (trajectory.at(k), trajectory.at(k + 1));
        let v = trajectory.velocity(k);
        max_velocity = max_velocity.max(v.abs());
        let lhs = (phi.value(t1, x1)? - phi.value(t, x)?) * f64::from(n);
        let rhs = phi.phi_t(t, x)? + phi.phi_x(t, x)? * v + 0.5 * eps * phi.phi_xx(t, x)? * v * v;
        residuals.push(lhs - rhs);
    }
    let max_abs = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mean_abs = if residuals.is_empty() {
        0.0
    } else {
        crate::sum::sum(residuals.iter().map(|r| r.abs())) / residuals.len() as f64
    };
    let velocity_threshold = f64::from(n).powf(2.0 / 3.0);
    Ok(ItoReport {
        n,
        residuals,
        max_abs,
        mean_abs,
        max_velocity,
        velocity_threshold,
        hypothesis_violated: max_velocity > velocity_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr, Support};
    use crate::grid::GridLevel;
    use crate::noise::{NoiseAlphabet, NoiseEnsemble};
    use crate::sde::solve_grid_ode;

    fn level(n: u32) -> GridLevel {
        GridLevel::new(n).unwrap()
    }

    fn unbounded() -> Support {
        Support {
            t: (f64::NEG_INFINITY, f64::INFINITY),
            x: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    #[test]
    fn constant_phi_has_zero_residual() {
        let p = CauchyProblem::from_sources("sin(x)", "1", 0.2, level(32)).unwrap();
        let e = NoiseEnsemble::sample(p.level, NoiseAlphabet::white(), 1, 3).unwrap();
        let tr = solve_grid_ode(&p, Some(&e.path(0))).unwrap();
        let flat = TestFunction {
            expr: Expr::Const(2.5),
            d_t: Expr::Const(0.0),
            d_x: Expr::Const(0.0),
            d_xx: Expr::Const(0.0),
            d_xxx: Expr::Const(0.0),
            support: unbounded(),
        };
        let r = ito_residual(&flat, &tr, &p).unwrap();
        assert_eq!(r.residuals.len(), 31);
        assert!(r.residuals.iter().all(|v| *v == 0.0));
        assert!(!r.hypothesis_violated);
    }

    #[test]
    fn quadratic_in_x_is_exact() {
        // φ = x² without time dependence: the expansion has no remainder
        let p = CauchyProblem::from_sources("0", "1", 0.0, level(16)).unwrap();
        let e = NoiseEnsemble::sample(p.level, NoiseAlphabet::white(), 1, 9).unwrap();
        let tr = solve_grid_ode(&p, Some(&e.path(0))).unwrap();
        let expr = parse("x^2").unwrap();
        let phi = TestFunction {
            d_t: Expr::Const(0.0),
            d_x: parse("2*x").unwrap(),
            d_xx: Expr::Const(2.0),
            d_xxx: Expr::Const(0.0),
            expr,
            support: unbounded(),
        };
        let r = ito_residual(&phi, &tr, &p).unwrap();
        assert!(r.max_abs < 1e-12, "{}", r.max_abs);
    }

    #[test]
    fn deterministic_order_one() {
        let phi = TestFunction::from_source("x*bump((t-0.5)/1)*bump(x/3)").unwrap();
        let mut prev = None;
        for n in [64, 128, 256] {
            let p = CauchyProblem::from_sources("-x", "0", 1.0, level(n)).unwrap();
            let tr = solve_grid_ode(&p, None).unwrap();
            let r = ito_residual(&phi, &tr, &p).unwrap();
            if let Some(q) = prev {
                assert!(q / r.max_abs >= 1.8, "{q} / {}", r.max_abs);
            }
            prev = Some(r.max_abs);
        }
    }

    #[test]
    fn level_mismatch() {
        let p = CauchyProblem::from_sources("0", "0", 0.0, level(8)).unwrap();
        let q = CauchyProblem::from_sources("0", "0", 0.0, level(16)).unwrap();
        let tr = solve_grid_ode(&q, None).unwrap();
        assert!(ito_residual(&TestFunction::standard(), &tr, &p).is_err());
    }
}
