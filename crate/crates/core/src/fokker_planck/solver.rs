use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::sum::NeumaierSum;

/// Discretization of the finite-volume solver.
///
/// Node `j` sits at `x_j = -W + j dx` and owns the control volume
/// `[x_j - dx/2, x_j + dx/2)`; `P_j` is the density there. Density CSVs label
/// columns by `x_j`, so empirical bins and solver nodes share one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpParams {
    pub halfwidth: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Times at which `P` is stored; snapped to the nearest time step.
    pub slices: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FPSolution {
    pub f: String,
    pub h: String,
    pub x0: f64,
    pub halfwidth: f64,
    pub dx: f64,
    /// Time step actually used: `t_end / steps`, at most the requested one.
    pub dt: f64,
    pub steps: u64,
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
    pub density: Vec<Vec<f64>>,
    /// `Σ P dx` at each stored time.
    pub mass: Vec<f64>,
    /// Largest `|Σ P dx - 1|` over all steps.
    pub max_mass_error: f64,
    pub min_value: f64,
}

impl FPSolution {
    pub fn slice_position(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-9)
    }

    pub fn mean(&self, slice: usize) -> f64 {
        let p = &self.density[slice];
        crate::sum::sum(self.nodes.iter().zip(p).map(|(x, v)| x * v)) * self.dx
    }

    pub fn variance(&self, slice: usize) -> f64 {
        let m = self.mean(slice);
        let p = &self.density[slice];
        crate::sum::sum(self.nodes.iter().zip(p).map(|(x, v)| (x - m) * (x - m) * v)) * self.dx
    }

    /// Same layout as the empirical density CSV: header of node coordinates,
    /// one row per stored time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for x in &self.nodes {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.density) {
            write!(out, "{t}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

struct Mesh {
    m: usize,
    nodes: Vec<f64>,
    /// `x_j - dx/2` for `j = 1..m`, the interior interfaces.
    interfaces: Vec<f64>,
}

fn mesh(halfwidth: f64, dx: f64) -> Result<Mesh> {
    if !(dx > 0.0) || !(halfwidth > 0.0) {
        return Err(Error::Invalid(format!("need dx > 0 and a positive window, got dx={dx}, W={halfwidth}")));
    }
    let cells = 2.0 * halfwidth / dx;
    let m = cells.round() as usize;
    if (cells - m as f64).abs() > 1e-9 * cells.max(1.0) || m < 2 {
        return Err(Error::Invalid(format!("window width {} is not a multiple of dx = {dx}", 2.0 * halfwidth)));
    }
    let nodes: Vec<f64> = (0..m).map(|j| -halfwidth + j as f64 * dx).collect();
    let interfaces = nodes[1..].iter().map(|x| x - 0.5 * dx).collect();
    Ok(Mesh { m, nodes, interfaces })
}

/// Coefficients at one time: drift at interfaces, `½ h²` at nodes.
fn coefficients(f: &Expr, h: &Expr, mesh: &Mesh, t: f64, drift: &mut [f64], diff: &mut [f64]) -> Result<(f64, f64)> {
    let mut max_f = 0.0f64;
    let mut max_h2 = 0.0f64;
    for (a, x) in drift.iter_mut().zip(&mesh.interfaces) {
        *a = f.eval(t, *x)?;
        max_f = max_f.max(a.abs());
    }
    for (d, x) in diff.iter_mut().zip(&mesh.nodes) {
        let v = h.eval(t, *x)?;
        max_h2 = max_h2.max(v * v);
        *d = 0.5 * v * v;
    }
    Ok((max_f, max_h2))
}

fn stable_dt(dx: f64, max_f: f64, max_h2: f64) -> f64 {
    dx * dx / (2.0 * max_h2 + dx * max_f)
}

/// Largest time step satisfying the stability condition
/// `dt <= dx² / (2 max h² + dx max|f|)` on the mesh. Time-dependent
/// coefficients are scanned on 257 times in `[0, t_end]`.
pub fn admissible_dt(f: &Expr, h: &Expr, halfwidth: f64, dx: f64, t_end: f64) -> Result<f64> {
    let mesh = mesh(halfwidth, dx)?;
    let mut drift = vec![0.0; mesh.m - 1];
    let mut diff = vec![0.0; mesh.m];
    let dynamic = f.depends_on(Var::T) || h.depends_on(Var::T);
    let times = if dynamic { 257 } else { 1 };
    let mut best = f64::INFINITY;
    for i in 0..times {
        let t = if times == 1 { 0.0 } else { t_end * i as f64 / (times - 1) as f64 };
        let (mf, mh) = coefficients(f, h, &mesh, t, &mut drift, &mut diff)?;
        best = best.min(stable_dt(dx, mf, mh));
    }
    Ok(best)
}

/// Explicit conservative finite-volume solution of the Fokker-Planck
/// equation from a discrete delta at the node whose control volume holds
/// `x0`. Drift fluxes are upwinded, diffusion fluxes central, and no mass
/// crosses the outer boundary.
pub fn fp_solve(f: &Expr, h: &Expr, x0: f64, params: &FpParams) -> Result<FPSolution> {
    let FpParams {
        halfwidth,
        dx,
        dt,
        t_end,
        ..
    } = *params;
    let mesh = mesh(halfwidth, dx)?;
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Invalid(format!("need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")));
    }
    let j0 = ((x0 + halfwidth) / dx + 0.5).floor();
    if !(0.0..mesh.m as f64).contains(&j0) {
        return Err(Error::Invalid(format!("x0 = {x0} is outside the solver window")));
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as u64;
    let dt = if steps == 0 { dt } else { t_end / steps as f64 };
    let mut saves: Vec<(u64, usize)> = Vec::new();
    for (i, t) in params.slices.iter().enumerate() {
        let s = (t / dt).round();
        if !(0.0..=steps as f64).contains(&s) {
            return Err(Error::Invalid(format!("slice t = {t} is outside [0, {t_end}]")));
        }
        saves.push((s as u64, i));
    }
    saves.sort();

    let m = mesh.m;
    let mut p = vec![0.0; m];
    p[j0 as usize] = 1.0 / dx;
    let mut flux = vec![0.0; m + 1];
    let mut drift = vec![0.0; m - 1];
    let mut diff = vec![0.0; m];
    let dynamic = f.depends_on(Var::T) || h.depends_on(Var::T);
    let check = |drift: &mut [f64], diff: &mut [f64], t: f64| -> Result<()> {
        let (mf, mh) = coefficients(f, h, &mesh, t, drift, diff)?;
        let max_dt = stable_dt(dx, mf, mh);
        if dt > max_dt {
            return Err(Error::Stability { dt, max_dt });
        }
        Ok(())
    };
    check(&mut drift, &mut diff, 0.0)?;

    let mut times = vec![0.0; saves.len()];
    let mut density = vec![Vec::new(); saves.len()];
    let mut mass = vec![0.0; saves.len()];
    let mut max_mass_error = 0.0f64;
    let mut min_value = 0.0f64;
    let mut next = 0;
    let ratio = dt / dx;
    for s in 0..=steps {
        while next < saves.len() && saves[next].0 == s {
            let i = saves[next].1;
            times[i] = s as f64 * dt;
            mass[i] = crate::sum::sum(p.iter().copied()) * dx;
            density[i] = p.clone();
            next += 1;
        }
        if s == steps {
            break;
        }
        let t = s as f64 * dt;
        if dynamic && s > 0 {
            check(&mut drift, &mut diff, t)?;
        }
        for i in 1..m {
            let a = drift[i - 1];
            let advect = if a > 0.0 { a * p[i - 1] } else { a * p[i] };
            flux[i] = advect - (diff[i] * p[i] - diff[i - 1] * p[i - 1]) / dx;
        }
        let mut total = NeumaierSum::new();
        for j in 0..m {
            p[j] -= ratio * (flux[j + 1] - flux[j]);
            min_value = min_value.min(p[j]);
            total.add(p[j]);
        }
        max_mass_error = max_mass_error.max((total.value() * dx - 1.0).abs());
    }
    Ok(FPSolution {
        f: f.to_string(),
        h: h.to_string(),
        x0,
        halfwidth,
        dx,
        dt,
        steps,
        nodes: mesh.nodes,
        times,
        density,
        mass,
        max_mass_error,
        min_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn params(dx: f64, dt: f64, t_end: f64, slices: &[f64]) -> FpParams {
        FpParams {
            halfwidth: 4.0,
            dx,
            dt,
            t_end,
            slices: slices.to_vec(),
        }
    }

    fn solve(f: &str, h: &str, x0: f64, p: &FpParams) -> Result<FPSolution> {
        fp_solve(&parse(f).unwrap(), &parse(h).unwrap(), x0, p)
    }

    #[test]
    fn heat_kernel_moments() {
        let dx = 1.0 / 64.0;
        let dt = admissible_dt(&parse("0").unwrap(), &parse("1").unwrap(), 4.0, dx, 0.5).unwrap();
        let s = solve("0", "1", 0.0, &params(dx, dt, 0.5, &[0.5])).unwrap();
        assert!(s.mean(0).abs() < 1e-3);
        assert!((s.variance(0) - 0.5).abs() < 2e-2, "{}", s.variance(0));
        assert!(s.max_mass_error < 1e-6);
        assert!(s.min_value >= -1e-12);
    }

    #[test]
    fn frozen_delta() {
        let s = solve("0", "0", 0.5, &params(0.25, 0.01, 1.0, &[0.0, 1.0])).unwrap();
        assert_eq!(s.density[0], s.density[1]);
        assert_eq!(s.mass[1], 1.0);
        let j = s.nodes.iter().position(|x| *x == 0.5).unwrap();
        assert_eq!(s.density[1][j], 4.0);
    }

    #[test]
    fn ornstein_uhlenbeck_relaxes() {
        let dx = 1.0 / 64.0;
        let dt = admissible_dt(&parse("-x").unwrap(), &parse("1").unwrap(), 4.0, dx, 4.0).unwrap();
        let s = solve("-x", "1", 1.0, &params(dx, dt, 4.0, &[4.0])).unwrap();
        assert!((s.variance(0) - 0.5).abs() < 2e-2, "{}", s.variance(0));
        assert!((s.mean(0) - (-4.0f64).exp()).abs() < 1e-2);
        assert!(s.max_mass_error < 1e-6);
    }

    #[test]
    fn instability_reports_admissible_step() {
        let err = solve("0", "1", 0.0, &params(0.1, 0.01, 1.0, &[])).unwrap_err();
        match err {
            Error::Stability { dt, max_dt } => {
                assert_eq!(dt, 0.01);
                assert!((max_dt - 0.005).abs() < 1e-15);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn time_dependent_coefficients_are_checked_each_step() {
        // diffusion grows with t until the step becomes unstable
        let err = solve("0", "1+10*t", 0.0, &params(0.25, 0.02, 1.0, &[])).unwrap_err();
        assert!(matches!(err, Error::Stability { .. }));
    }

    #[test]
    fn mesh_validation() {
        assert!(solve("0", "1", 0.0, &params(0.3, 0.001, 1.0, &[])).is_err());
        assert!(solve("0", "1", 9.0, &params(0.25, 0.001, 1.0, &[])).is_err());
        assert!(solve("0", "1", 0.0, &params(0.25, 0.001, 1.0, &[2.0])).is_err());
    }

    #[test]
    fn csv_schema() {
        let s = solve("0", "0", 0.0, &params(2.0, 0.5, 1.0, &[0.0, 1.0])).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,-4,-2,0,2");
        assert_eq!(lines[1], "0,0,0,0.5,0");
        assert_eq!(lines[2], "1,0,0,0.5,0");
    }
}
