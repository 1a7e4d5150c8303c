use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::TestFunction;
use crate::noise::{EnsembleDescriptor, MomentAcc, NoiseEnsemble};
use crate::sde::{bin_index, simulate_ensemble, CauchyProblem, PathObserver, PathRecord, ProblemSpec};
use crate::sum::NeumaierSum;

/// The expansion of `ε Σ_k E[Δφ/Δt]` into drift, noise and correction terms, each an
/// ensemble expectation summed over `k = 0..n-1`:
///
/// ```text
/// drift            ε Σ E[φ_t + f φ_x]
/// noise            ε Σ E[(φ_x h + ε φ_xx f h) ξ]
/// correction       ε Σ E[(ε/2) φ_xx f²]
/// quadratic_noise  ε Σ E[(ε/2) φ_xx h² ξ²]
/// ```
///
/// The noise term vanishes exactly on exhaustive ensembles and the last one
/// equals `ε Σ E[½ φ_xx h²]` there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakFormPieces {
    pub drift: f64,
    pub noise: f64,
    pub correction: f64,
    pub quadratic_noise: f64,
}

impl WeakFormPieces {
    pub fn sum(&self) -> f64 {
        crate::sum::sum([self.drift, self.noise, self.correction, self.quadratic_noise])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakFormReport {
    /// `ε² Σ_t Σ_x (φ_t + f φ_x + ½ h² φ_xx) ρ + φ(0, x0)`, with the bracket
    /// evaluated at bin left edges.
    pub residual: f64,
    pub residual_std_error: Option<f64>,
    pub initial_value: f64,
    pub pieces: WeakFormPieces,
    /// `Σ pieces + φ(0, x0)`.
    pub expansion_total: f64,
    /// `ε Σ E[φ_t + φ_x v + (ε/2) φ_xx v²] + φ(0, x0)` computed directly.
    pub direct_total: f64,
    pub decomposition_error: f64,
    /// The residual with the bracket evaluated at the trajectory itself.
    pub pointwise_residual: f64,
    /// `|residual - pointwise_residual|`: the cost of binning.
    pub binning_gap: f64,
    pub phi: String,
    pub problem: ProblemSpec,
    pub ensemble: EnsembleDescriptor,
}

struct WeakObserver<'a> {
    problem: &'a CauchyProblem,
    phi: &'a TestFunction,
    table: &'a [f64],
    bins: usize,
    pieces: [NeumaierSum; 4],
    direct: NeumaierSum,
    pointwise: NeumaierSum,
    binned: MomentAcc,
}

impl<'a> WeakObserver<'a> {
    fn new(problem: &'a CauchyProblem, phi: &'a TestFunction, table: &'a [f64], bins: usize) -> Self {
        Self {
            problem,
            phi,
            table,
            bins,
            pieces: Default::default(),
            direct: NeumaierSum::new(),
            pointwise: NeumaierSum::new(),
            binned: MomentAcc::default(),
        }
    }
}

impl PathObserver for WeakObserver<'_> {
    fn observe(&mut self, path: &PathRecord<'_>) -> Result<()> {
        let level = self.problem.level;
        let eps = level.step_f64();
        let mut local = [0.0; 6];
        let mut binned = 0.0;
        for k in 0..level.n() as usize {
            let t = level.coord(k as i64);
            let x = path.at(k);
            if let Some(j) = bin_index(level, x) {
                binned += self.table[k * self.bins + j];
            }
            if !self.phi.support.contains(t, x) {
                continue;
            }
            let (pt, px, pxx) = (self.phi.phi_t(t, x)?, self.phi.phi_x(t, x)?, self.phi.phi_xx(t, x)?);
            let f = self.problem.drift.eval(t, x)?;
            let h = self.problem.diffusion.eval(t, x)?;
            let xi = path.noise[k];
            let v = f + h * xi;
            local[0] += pt + f * px;
            local[1] += (px * h + eps * pxx * f * h) * xi;
            local[2] += 0.5 * eps * pxx * f * f;
            local[3] += 0.5 * eps * pxx * h * h * xi * xi;
            local[4] += pt + px * v + 0.5 * eps * pxx * v * v;
            local[5] += pt + f * px + 0.5 * h * h * pxx;
        }
        for (acc, v) in self.pieces.iter_mut().zip(&local[..4]) {
            acc.add(*v);
        }
        self.direct.add(local[4]);
        self.pointwise.add(local[5]);
        self.binned.add(binned);
        Ok(())
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.pieces.iter_mut().zip(&other.pieces) {
            a.merge(b);
        }
        self.direct.merge(&other.direct);
        self.pointwise.merge(&other.pointwise);
        self.binned.merge(other.binned);
    }
}

/// Weak-form Fokker-Planck residual of the empirical density.
///
/// `φ` must vanish for `t >= 1` and have its spatial support inside the
/// window. Errors are reported for either violation.
pub fn weak_form_residual(
    problem: &CauchyProblem,
    ensemble: &NoiseEnsemble,
    phi: &TestFunction,
) -> Result<WeakFormReport> {
    let level = problem.level;
    if problem.start != 0 {
        return Err(Error::Invalid("the weak form needs trajectories started at t = 0".into()));
    }
    if phi.support.t.1 > 1.0 {
        return Err(Error::NotVanishing(format!(
            "test function support reaches t = {} but must vanish at t = 1",
            phi.support.t.1
        )));
    }
    let w = level.halfwidth_f64();
    if phi.support.x.0 < -w || phi.support.x.1 > w {
        return Err(Error::WindowTooSmall(format!(
            "support [{}, {}] is not inside [-{w}, {w})",
            phi.support.x.0, phi.support.x.1
        )));
    }
    let n = level.n() as usize;
    let eps = level.step_f64();
    let bins = 2 * level.halfwidth_steps() as usize;
    let mut table = vec![0.0; n * bins];
    for k in 0..n {
        let t = level.coord(k as i64);
        if !(phi.support.t.0 < t && t < phi.support.t.1) {
            continue;
        }
        for j in 0..bins {
            let x = level.coord(j as i64 - level.halfwidth_steps());
            if phi.support.contains(t, x) {
                let f = problem.drift.eval(t, x)?;
                let h = problem.diffusion.eval(t, x)?;
                table[k * bins + j] = phi.phi_t(t, x)? + f * phi.phi_x(t, x)? + 0.5 * h * h * phi.phi_xx(t, x)?;
            }
        }
    }
    let obs = simulate_ensemble(problem, ensemble, || WeakObserver::new(problem, phi, &table, bins))?;
    let count = ensemble.count() as f64;
    let mean = |s: &NeumaierSum| eps * s.value() / count;
    let initial_value = phi.value(level.coord(0), problem.x0)?;
    let pieces = WeakFormPieces {
        drift: mean(&obs.pieces[0]),
        noise: mean(&obs.pieces[1]),
        correction: mean(&obs.pieces[2]),
        quadratic_noise: mean(&obs.pieces[3]),
    };
    let expansion_total = pieces.sum() + initial_value;
    let direct_total = mean(&obs.direct) + initial_value;
    let binned = obs.binned.finish(!ensemble.is_exhaustive());
    let residual = eps * binned.mean + initial_value;
    let pointwise_residual = mean(&obs.pointwise) + initial_value;
    Ok(WeakFormReport {
        residual,
        residual_std_error: binned.std_error.map(|s| s * eps),
        initial_value,
        pieces,
        expansion_total,
        direct_total,
        decomposition_error: (expansion_total - direct_total).abs(),
        pointwise_residual,
        binning_gap: (residual - pointwise_residual).abs(),
        phi: phi.expr.to_string(),
        problem: problem.spec(),
        ensemble: ensemble.descriptor(),
    })
}
