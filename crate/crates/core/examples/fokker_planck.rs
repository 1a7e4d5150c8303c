//! Finite-volume Fokker-Planck solver and its comparison with the simulated
//! Ornstein-Uhlenbeck density.

use hypergrid::expr::parse;
use hypergrid::fokker_planck::{admissible_dt, cross_validate, fp_solve, FpParams};
use hypergrid::grid::GridLevel;
use hypergrid::noise::{NoiseAlphabet, NoiseEnsemble};
use hypergrid::sde::CauchyProblem;

fn main() -> hypergrid::Result<()> {
    let (f, h) = (parse("-x")?, parse("1")?);
    let dx = 1.0 / 64.0;
    let dt = admissible_dt(&f, &h, 8.0, dx, 1.0)?;
    let params = FpParams {
        halfwidth: 8.0,
        dx,
        dt,
        t_end: 1.0,
        slices: vec![0.25, 0.5, 1.0],
    };
    let sol = fp_solve(&f, &h, 0.0, &params)?;
    println!("OU from a point mass, {} steps of {:.2e}:", sol.steps, sol.dt);
    for (s, t) in sol.times.iter().enumerate() {
        let exact = (1.0 - (-2.0 * t).exp()) / 2.0;
        println!("  t={t:<5} mass {:.12}  variance {:.4} (exact {exact:.4})", sol.mass[s], sol.variance(s));
    }

    let too_big = FpParams { dt: 2.0 * dt, ..params.clone() };
    if let Err(e) = fp_solve(&f, &h, 0.0, &too_big) {
        println!("  {e}");
    }

    let level = GridLevel::new(128)?;
    let problem = CauchyProblem::from_sources("-x", "1", 0.0, level)?;
    let ensemble = NoiseEnsemble::sample(level, NoiseAlphabet::white(), 100_000, 7)?;
    let slices = vec![0.5, 0.625, 0.75, 0.875, 1.0];
    let report = cross_validate(&problem, &ensemble, &FpParams { slices, ..params })?;
    println!("\nsimulated vs solved density, n=128, 1e5 paths:");
    for (t, l1) in report.times.iter().zip(&report.l1) {
        println!("  t={t:<6} L1 {l1:.4}");
    }
    Ok(())
}
