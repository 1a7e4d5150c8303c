//! The discrete chain rule with its second-order correction, checked along
//! smooth and noisy grid trajectories.

use hypergrid::expr::TestFunction;
use hypergrid::fokker_planck::ito_residual;
use hypergrid::grid::GridLevel;
use hypergrid::noise::{NoiseAlphabet, NoiseEnsemble};
use hypergrid::sde::{continuous_dependence_check, solve_grid_ode, CauchyProblem};

fn main() -> hypergrid::Result<()> {
    let phi = TestFunction::standard();
    let smooth = TestFunction::from_source("x*bump((t-0.5)/1)*bump(x/3)")?;
    println!("{:>5} {:>14} {:>14} {:>10}", "n", "noisy max|r|", "smooth max|r|", "max|v|");
    for n in [64u32, 128, 256, 512] {
        let level = GridLevel::new(n)?;
        let brownian = CauchyProblem::from_sources("0", "1", 0.0, level)?;
        let noise = NoiseEnsemble::sample(level, NoiseAlphabet::white(), 1, 0)?.path(0);
        let path = solve_grid_ode(&brownian, Some(&noise))?;
        let noisy = ito_residual(&phi, &path, &brownian)?;

        let decay = CauchyProblem::from_sources("-x", "0", 1.0, level)?;
        let det = ito_residual(&smooth, &solve_grid_ode(&decay, None)?, &decay)?;
        println!("{n:>5} {:>14.4e} {:>14.4e} {:>10.2}", noisy.max_abs, det.max_abs, noisy.max_velocity);
    }

    // a drift of 40 moves faster than n^(2/3) = 16 allows at n = 64
    let level = GridLevel::new(64)?;
    let fast = CauchyProblem::from_sources("40", "0", -1.0, level)?;
    let r = ito_residual(&phi, &solve_grid_ode(&fast, None)?, &fast)?;
    println!(
        "\nfast path: |v| = {} against n^(2/3) = {:.1}, hypothesis violated = {}",
        r.max_velocity, r.velocity_threshold, r.hypothesis_violated
    );

    let sine = CauchyProblem::from_sources("sin(x)", "0", 0.0, level)?;
    let dep = continuous_dependence_check(&sine, 0.1, 0.11, 1.0, 1.0)?;
    println!("Grönwall bound for x' = sin x holds: {} (max gap {:.5})", dep.holds, dep.max_gap);
    Ok(())
}
