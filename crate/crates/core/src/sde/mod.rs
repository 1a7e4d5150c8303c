//! Stochastic grid equations.
//!
//! Each noise path `ξ` drives the explicit recursion
//!
//! ```text
//! x(t_{k+1}) = x(t_k) + (1/n) (f(t_k, x(t_k)) + h(t_k, x(t_k)) ξ(t_k))
//! ```
//!
//! which is total and deterministic, so every Cauchy problem has exactly one
//! grid solution per path. The state is carried as an unevaluated
//! double-double sum so that walks visiting the same lattice site by
//! different orders of steps land on the same floating-point value; the
//! reported trajectory is the rounded state.
//!
//! Ensembles are simulated in a streaming fashion: trajectories are handed to
//! [`PathObserver`]s and never stored in bulk.

mod dependence;
mod density;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::grid::GridLevel;
use crate::noise::{Expectation, MomentAcc, NoiseEnsemble, NoisePath};
use crate::parallel;

pub use dependence::{continuous_dependence_check, DependenceReport, DependenceStep};
pub use density::{
    bin_index, density, event_probability, DensityAccumulator, DensityField, DensityMetadata,
    EventCounter, EventProbability,
};

/// Trajectories beyond this magnitude are reported as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// A drift or diffusion coefficient with a fast path for constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    expr: Expr,
    constant: Option<f64>,
}

impl Coefficient {
    pub fn new(expr: Expr) -> Self {
        let constant = if expr.depends_on(crate::expr::Var::T) || expr.depends_on(crate::expr::Var::X) {
            None
        } else {
            expr.eval(0.0, 0.0).ok()
        };
        Self { expr, constant }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        match self.constant {
            Some(c) => Ok(c),
            None => Ok(self.expr.eval(t, x)?),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn constant(&self) -> Option<f64> {
        self.constant
    }
}

/// `Δx/Δt = f(t,x) + h(t,x) ξ`, `x(t0) = x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyProblem {
    pub drift: Coefficient,
    pub diffusion: Coefficient,
    pub x0: f64,
    /// Index of the starting grid time `t0 = start/n`.
    pub start: usize,
    pub level: GridLevel,
}

/// Source form of a problem, embedded in output metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub f: String,
    pub h: String,
    pub x0: f64,
    pub t0: f64,
    pub n: u32,
}

impl CauchyProblem {
    pub fn new(drift: Expr, diffusion: Expr, x0: f64, level: GridLevel) -> Self {
        Self {
            drift: Coefficient::new(drift),
            diffusion: Coefficient::new(diffusion),
            x0,
            start: 0,
            level,
        }
    }

    pub fn from_sources(f: &str, h: &str, x0: f64, level: GridLevel) -> Result<Self> {
        Ok(Self::new(parse(f)?, parse(h)?, x0, level))
    }

    pub fn starting_at(mut self, start: usize) -> Result<Self> {
        if start > self.level.n() as usize {
            return Err(Error::Invalid(format!("start index {start} is past t = 1")));
        }
        self.start = start;
        Ok(self)
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec {
            f: self.drift.expr().to_string(),
            h: self.diffusion.expr().to_string(),
            x0: self.x0,
            t0: self.level.coord(self.start as i64),
            n: self.level.n(),
        }
    }

    /// The same problem with a different initial value.
    pub fn with_x0(&self, x0: f64) -> Self {
        Self { x0, ..self.clone() }
    }

    /// Runs the recursion for one noise path, writing `x(t_k)` for
    /// `k = start..=n` into `out`. `noise` must cover indices `start..n`.
    pub fn integrate_into(&self, noise: &[f64], out: &mut [f64], path: u64) -> Result<()> {
        let n = self.level.n() as usize;
        let step = self.level.step_f64();
        debug_assert_eq!(out.len(), n + 1 - self.start);
        let (mut hi, mut lo) = (self.x0, 0.0);
        out[0] = self.x0;
        for k in self.start..n {
            let t = self.level.coord(k as i64);
            let f = self.drift.eval(t, hi)?;
            let h = self.diffusion.eval(t, hi)?;
            let delta = step * (f + h * noise[k]);
            let (s, e) = two_sum(hi, delta);
            (hi, lo) = fast_two_sum(s, lo + e);
            if !(hi.abs() <= DIVERGENCE_BOUND) {
                return Err(Error::Diverged {
                    path,
                    step: k + 1,
                    value: hi.abs(),
                });
            }
            out[k + 1 - self.start] = hi;
        }
        Ok(())
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Grid solution `x(t_k)`, `k = start..=n`, for one noise path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub level: GridLevel,
    pub start: usize,
    pub values: Vec<f64>,
    pub path: Option<u64>,
}

impl Trajectory {
    /// `x(t_k)` for absolute grid index `k`.
    pub fn at(&self, k: usize) -> f64 {
        self.values[k - self.start]
    }

    /// Grid derivative `Δx/Δt` at absolute index `k < n`.
    pub fn velocity(&self, k: usize) -> f64 {
        (self.at(k + 1) - self.at(k)) * f64::from(self.level.n())
    }
}

/// Solves the grid equation for one noise path, or the deterministic grid ODE
/// when `noise` is `None`.
pub fn solve_grid_ode(problem: &CauchyProblem, noise: Option<&NoisePath>) -> Result<Trajectory> {
    let n = problem.level.n() as usize;
    let zeros;
    let (values, path) = match noise {
        Some(p) => {
            if p.level != problem.level {
                return Err(Error::LevelMismatch(p.level.n(), problem.level.n()));
            }
            if p.values.len() < n {
                return Err(Error::Invalid(format!(
                    "noise path has {} values, need at least {n}",
                    p.values.len()
                )));
            }
            (&p.values[..], Some(p.index))
        }
        None => {
            zeros = vec![0.0; n + 1];
            (&zeros[..], None)
        }
    };
    let mut out = vec![0.0; n + 1 - problem.start];
    problem.integrate_into(values, &mut out, path.unwrap_or(0))?;
    Ok(Trajectory {
        level: problem.level,
        start: problem.start,
        values: out,
        path,
    })
}

/// One simulated path as seen by observers. `x[k]` is `x(t_{start+k})`,
/// `noise[k]` is `ξ(t_k)` over all `n+1` grid points.
pub struct PathRecord<'a> {
    pub index: u64,
    pub start: usize,
    pub noise: &'a [f64],
    pub x: &'a [f64],
}

impl PathRecord<'_> {
    pub fn at(&self, k: usize) -> f64 {
        self.x[k - self.start]
    }
}

/// Streaming consumer of simulated paths. Merging must be associative; the
/// simulator merges partial observers in path-index order.
pub trait PathObserver: Send + Sized {
    fn observe(&mut self, path: &PathRecord<'_>) -> Result<()>;
    fn merge(&mut self, other: Self);
}

impl<A: PathObserver, B: PathObserver> PathObserver for (A, B) {
    fn observe(&mut self, path: &PathRecord<'_>) -> Result<()> {
        self.0.observe(path)?;
        self.1.observe(path)
    }

    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

impl<A: PathObserver, B: PathObserver, C: PathObserver> PathObserver for (A, B, C) {
    fn observe(&mut self, path: &PathRecord<'_>) -> Result<()> {
        self.0.observe(path)?;
        self.1.observe(path)?;
        self.2.observe(path)
    }

    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
        self.2.merge(other.2);
    }
}

/// Simulates one trajectory per ensemble path and streams each into an
/// observer built by `make`. Divergence errors carry the path index.
pub fn simulate_ensemble<O, M>(problem: &CauchyProblem, ensemble: &NoiseEnsemble, make: M) -> Result<O>
where
    O: PathObserver,
    M: Fn() -> O + Sync,
{
    if ensemble.level() != problem.level {
        return Err(Error::LevelMismatch(ensemble.level().n(), problem.level.n()));
    }
    let len = ensemble.path_len();
    let xlen = len - problem.start;
    let (obs, _, _) = parallel::reduce_indices(
        ensemble.count(),
        || (make(), vec![0.0; len], vec![0.0; xlen]),
        |(obs, noise, x), index| {
            ensemble.fill_path(index, noise);
            problem.integrate_into(noise, x, index)?;
            obs.observe(&PathRecord {
                index,
                start: problem.start,
                noise,
                x,
            })
        },
        |a, b| a.0.merge(b.0),
    )?;
    Ok(obs)
}

/// Ensemble mean of a path functional.
pub struct FunctionalObserver<F> {
    f: F,
    acc: MomentAcc,
}

impl<F> FunctionalObserver<F>
where
    F: Fn(&PathRecord<'_>) -> f64 + Send + Clone,
{
    pub fn new(f: F) -> Self {
        Self {
            f,
            acc: MomentAcc::default(),
        }
    }

    pub fn finish(&self, sampled: bool) -> Expectation {
        self.acc.finish(sampled)
    }
}

impl<F> PathObserver for FunctionalObserver<F>
where
    F: Fn(&PathRecord<'_>) -> f64 + Send + Clone,
{
    fn observe(&mut self, path: &PathRecord<'_>) -> Result<()> {
        let v = (self.f)(path);
        if !v.is_finite() {
            return Err(Error::NonFiniteFunctional(path.index));
        }
        self.acc.add(v);
        Ok(())
    }

    fn merge(&mut self, other: Self) {
        self.acc.merge(other.acc);
    }
}

/// `E_ξ[Φ(ξ, x_ξ)]` over the ensemble.
pub fn expectation<F>(problem: &CauchyProblem, ensemble: &NoiseEnsemble, f: F) -> Result<Expectation>
where
    F: Fn(&PathRecord<'_>) -> f64 + Send + Sync + Clone,
{
    let obs = simulate_ensemble(problem, ensemble, || FunctionalObserver::new(f.clone()))?;
    Ok(obs.finish(!ensemble.is_exhaustive()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseAlphabet, DEFAULT_CAP};

    fn level(n: u32) -> GridLevel {
        GridLevel::new(n).unwrap()
    }

    #[test]
    fn zero_coefficients_give_constant_path() {
        let p = CauchyProblem::from_sources("0", "0", 1.0, level(8)).unwrap();
        let tr = solve_grid_ode(&p, None).unwrap();
        assert!(tr.values.iter().all(|v| *v == 1.0));
        assert_eq!(tr.values.len(), 9);
    }

    #[test]
    fn compound_growth() {
        let p = CauchyProblem::from_sources("x", "0", 1.0, level(4)).unwrap();
        let tr = solve_grid_ode(&p, None).unwrap();
        assert_eq!(tr.at(4), 2.44140625);
    }

    #[test]
    fn all_plus_noise_reaches_root_n() {
        for n in [4u32, 9, 16, 25, 64, 256] {
            let l = level(n);
            let p = CauchyProblem::from_sources("0", "1", 0.0, l).unwrap();
            let root = f64::from(n).sqrt();
            let path = NoisePath::from_values(l, vec![root; n as usize + 1]);
            let end = solve_grid_ode(&p, Some(&path)).unwrap().at(n as usize);
            if n.is_power_of_two() {
                // 1/n and √n are exact, so every step is
                assert_eq!(end, root);
            } else {
                assert!((end - root).abs() <= 4.0 * f64::EPSILON * root);
            }
        }
    }

    #[test]
    fn divergence_is_reported() {
        let p = CauchyProblem::from_sources("x^2", "0", 10.0, level(64)).unwrap();
        match solve_grid_ode(&p, None) {
            Err(Error::Diverged { step, .. }) => assert!(step > 1 && step <= 64),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn starting_later_keeps_initial_value() {
        let p = CauchyProblem::from_sources("1", "0", 0.5, level(8))
            .unwrap()
            .starting_at(4)
            .unwrap();
        let tr = solve_grid_ode(&p, None).unwrap();
        assert_eq!(tr.values.len(), 5);
        assert_eq!(tr.at(4), 0.5);
        assert_eq!(tr.at(8), 1.0);
    }

    #[test]
    fn adaptedness() {
        let l = level(16);
        let p = CauchyProblem::from_sources("sin(x) - t", "1 + 0.5*cos(x)", 0.2, l).unwrap();
        let ens = NoiseEnsemble::sample(l, NoiseAlphabet::white(), 4, 11).unwrap();
        for i in 0..4 {
            let base = ens.path(i);
            let tr = solve_grid_ode(&p, Some(&base)).unwrap();
            for k in 0..16 {
                let mut mutated = base.clone();
                for v in &mut mutated.values[k..] {
                    *v = -*v;
                }
                let tr2 = solve_grid_ode(&p, Some(&mutated)).unwrap();
                for j in 0..=k {
                    assert_eq!(tr.at(j).to_bits(), tr2.at(j).to_bits());
                }
            }
        }
    }

    #[test]
    fn brownian_moments_exhaustive() {
        let l = level(8);
        let p = CauchyProblem::from_sources("0", "1", 0.0, l).unwrap();
        let ens = NoiseEnsemble::enumerate(l, NoiseAlphabet::white(), DEFAULT_CAP).unwrap();
        let m1 = expectation(&p, &ens, |r| r.at(8)).unwrap();
        let m2 = expectation(&p, &ens, |r| r.at(8) * r.at(8)).unwrap();
        assert_eq!(m1.mean, 0.0);
        assert!((m2.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_diffusion_ensemble_is_deterministic() {
        let l = level(16);
        let p = CauchyProblem::from_sources("sin(t) - x", "0", 0.3, l).unwrap();
        let det = solve_grid_ode(&p, None).unwrap();
        let ens = NoiseEnsemble::sample(l, NoiseAlphabet::white(), 50, 1).unwrap();
        let worst = expectation(&p, &ens, |r| {
            r.x.iter().zip(&det.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .unwrap();
        assert_eq!(worst.mean, 0.0);
    }
}
