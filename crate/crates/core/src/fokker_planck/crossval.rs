use serde::{Deserialize, Serialize};

use super::solver::{admissible_dt, fp_solve, FPSolution, FpParams};
use crate::error::{Error, Result};
use crate::noise::{EnsembleDescriptor, NoiseEnsemble};
use crate::sde::{simulate_ensemble, CauchyProblem, DensityAccumulator, DensityField, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationReport {
    pub times: Vec<f64>,
    /// `Σ |ρ - P| dx` per slice, plus empirical mass the solver mesh misses.
    pub l1: Vec<f64>,
    pub max_l1: f64,
    pub dx: f64,
    pub dt: f64,
    /// Empirical bins per solver control volume.
    pub bins_per_cell: usize,
    pub problem: ProblemSpec,
    pub ensemble: EnsembleDescriptor,
}

/// L1 distance between an empirical density and a solver solution at every
/// solver time. Each control volume `[x_j - dx/2, x_j + dx/2)` must be a
/// union of empirical bins, and each solver time a stored density slice.
pub fn compare(density: &DensityField, fp: &FPSolution) -> Result<Vec<f64>> {
    let level = density.level();
    let n = f64::from(level.n());
    let per_cell = fp.dx * n;
    let k = per_cell.round();
    if k < 1.0 || (per_cell - k).abs() > 1e-9 * per_cell {
        return Err(Error::Alignment(format!(
            "solver cell width {} is not a multiple of the bin width 1/{}",
            fp.dx,
            level.n()
        )));
    }
    let k = k as i64;
    // first control-volume edge in bin units, relative to the window edge
    let edge = (fp.nodes[0] - 0.5 * fp.dx) * n + level.halfwidth_steps() as f64;
    if (edge - edge.round()).abs() > 1e-9 * edge.abs().max(1.0) {
        return Err(Error::Alignment(format!(
            "solver control volumes starting at {} do not fall on bin edges",
            fp.nodes[0] - 0.5 * fp.dx
        )));
    }
    let edge = edge.round() as i64;
    let bins = density.bins() as i64;
    let mut out = Vec::with_capacity(fp.times.len());
    for (t, p) in fp.times.iter().zip(&fp.density) {
        let k_t = (t * n).round();
        let slice = (((t * n) - k_t).abs() <= 1e-9)
            .then(|| density.slice_position(k_t as usize))
            .flatten()
            .ok_or_else(|| Error::Alignment(format!("no empirical slice at t = {t}")))?;
        let mut covered = 0.0;
        let mut l1 = crate::sum::NeumaierSum::new();
        for (j, pj) in p.iter().enumerate() {
            let lo = (edge + j as i64 * k).clamp(0, bins);
            let hi = (edge + (j as i64 + 1) * k).clamp(0, bins);
            let m: f64 = (lo..hi).map(|b| density.mass(slice, b as usize)).sum();
            covered += m;
            l1.add((m - pj * fp.dx).abs());
        }
        let inside: f64 = (0..bins as usize).map(|b| density.mass(slice, b)).sum();
        l1.add((inside - covered).abs() + density.overflow_fraction(slice));
        out.push(l1.value());
    }
    Ok(out)
}

/// Simulates the empirical density on the grid times closest to
/// `params.slices`, solves the Fokker-Planck equation on the same window,
/// and compares them. The solver step is shrunk so that every grid time is
/// hit exactly.
pub fn cross_validate(
    problem: &CauchyProblem,
    ensemble: &NoiseEnsemble,
    params: &FpParams,
) -> Result<CrossValidationReport> {
    let level = problem.level;
    let n = level.n();
    let mut ks = Vec::with_capacity(params.slices.len());
    for t in &params.slices {
        let k = (t * f64::from(n)).round();
        if (t * f64::from(n) - k).abs() > 1e-9 || k < problem.start as f64 || k > f64::from(n) {
            return Err(Error::Alignment(format!("slice t = {t} is not a simulated grid time")));
        }
        ks.push(k as usize);
    }
    let t_end = ks.iter().copied().max().unwrap_or(0) as f64 / f64::from(n);
    let w = level.halfwidth_f64();
    let mut dt = params.dt;
    if !(dt > 0.0) {
        dt = admissible_dt(problem.drift.expr(), problem.diffusion.expr(), w, params.dx, t_end.max(1e-9))?;
    }
    let per_grid_step = ((1.0 / f64::from(n)) / dt - 1e-9).ceil().max(1.0);
    let fp_params = FpParams {
        halfwidth: w,
        dx: params.dx,
        dt: 1.0 / (f64::from(n) * per_grid_step),
        t_end,
        slices: ks.iter().map(|k| level.coord(*k as i64)).collect(),
    };
    let fp = fp_solve(problem.drift.expr(), problem.diffusion.expr(), problem.x0, &fp_params)?;
    let density = simulate_ensemble(problem, ensemble, || DensityAccumulator::new(level, &ks))?.finish();
    let l1 = compare(&density, &fp)?;
    Ok(CrossValidationReport {
        times: fp.times.clone(),
        max_l1: l1.iter().copied().fold(0.0, f64::max),
        l1,
        dx: fp.dx,
        dt: fp.dt,
        bins_per_cell: (fp.dx * f64::from(n)).round() as usize,
        problem: problem.spec(),
        ensemble: ensemble.descriptor(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridLevel;
    use crate::noise::{NoiseAlphabet, DEFAULT_CAP};

    fn params(dx: f64, slices: &[f64]) -> FpParams {
        FpParams {
            halfwidth: 0.0,
            dx,
            dt: 0.0,
            t_end: 0.0,
            slices: slices.to_vec(),
        }
    }

    #[test]
    fn deterministic_at_rest() {
        let l = GridLevel::new(16).unwrap();
        let p = CauchyProblem::from_sources("-x", "0", 0.0, l).unwrap();
        let e = NoiseEnsemble::sample(l, NoiseAlphabet::white(), 10, 1).unwrap();
        let r = cross_validate(&p, &e, &params(0.125, &[0.5, 1.0])).unwrap();
        assert_eq!(r.l1, vec![0.0, 0.0]);
        assert_eq!(r.bins_per_cell, 2);
    }

    #[test]
    fn deterministic_moving_point() {
        // the upwind solver smears a moving point mass; the distance stays
        // bounded by the total mass of both densities
        let l = GridLevel::new(16).unwrap();
        let p = CauchyProblem::from_sources("1", "0", 0.0, l).unwrap();
        let e = NoiseEnsemble::sample(l, NoiseAlphabet::white(), 1, 1).unwrap();
        let r = cross_validate(&p, &e, &params(0.125, &[0.0, 1.0])).unwrap();
        assert_eq!(r.l1[0], 0.0);
        assert!(r.l1[1] <= 2.0 + 1e-12);
    }

    #[test]
    fn lattice_aligned_random_walk() {
        // n = 16 walk sites are 1/2 apart; solver nodes at the sites
        let l = GridLevel::new(16).unwrap();
        let p = CauchyProblem::from_sources("0", "1", 0.0, l).unwrap();
        let e = NoiseEnsemble::enumerate(l, NoiseAlphabet::white(), DEFAULT_CAP).unwrap();
        let r = cross_validate(&p, &e, &params(0.5, &[1.0])).unwrap();
        assert!(r.max_l1 < 0.15, "{:?}", r.l1);
    }

    #[test]
    fn misaligned_cells_are_rejected() {
        let l = GridLevel::new(16).unwrap();
        let p = CauchyProblem::from_sources("0", "1", 0.0, l).unwrap();
        let e = NoiseEnsemble::sample(l, NoiseAlphabet::white(), 10, 1).unwrap();
        assert!(matches!(
            cross_validate(&p, &e, &params(0.1, &[1.0])),
            Err(Error::Alignment(_))
        ));
        // odd number of bins per cell puts the edges mid-bin
        assert!(matches!(
            cross_validate(&p, &e, &params(3.0 / 16.0, &[1.0])),
            Err(Error::Alignment(_)) | Err(Error::Invalid(_))
        ));
        assert!(matches!(
            cross_validate(&p, &e, &params(0.125, &[0.3])),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn self_comparison_is_zero() {
        let l = GridLevel::new(8).unwrap();
        let p = CauchyProblem::from_sources("0", "1", 0.0, l).unwrap();
        let e = NoiseEnsemble::enumerate(l, NoiseAlphabet::white(), DEFAULT_CAP).unwrap();
        let d = simulate_ensemble(&p, &e, || DensityAccumulator::new(l, &[8])).unwrap().finish();
        let rho: Vec<f64> = d.coarsened_rho(0, 1).unwrap();
        assert_eq!(rho.len(), d.bins());
        let fp = FPSolution {
            f: "0".into(),
            h: "1".into(),
            x0: 0.0,
            halfwidth: 4.0,
            dx: 0.125,
            dt: 0.01,
            steps: 100,
            nodes: (0..64).map(|j| -4.0 + 0.0625 + j as f64 * 0.125).collect(),
            times: vec![1.0],
            density: vec![rho],
            mass: vec![1.0],
            max_mass_error: 0.0,
            min_value: 0.0,
        };
        // nodes offset by half a cell make the control volumes the bins
        let l1 = compare(&d, &fp).unwrap();
        assert!(l1[0] < 1e-15, "{l1:?}");
    }
}
