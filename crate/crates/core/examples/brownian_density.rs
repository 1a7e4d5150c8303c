//! Empirical density of the grid random walk, exact event probabilities and
//! the CSV layout written by `simulate`.

use hypergrid::grid::GridLevel;
use hypergrid::noise::{NoiseAlphabet, NoiseEnsemble, DEFAULT_CAP};
use hypergrid::sde::{event_probability, simulate_ensemble, CauchyProblem, DensityAccumulator};

fn main() -> hypergrid::Result<()> {
    let level = GridLevel::new(12)?;
    let problem = CauchyProblem::from_sources("0", "1", 0.0, level)?;
    let ensemble = NoiseEnsemble::enumerate(level, NoiseAlphabet::white(), DEFAULT_CAP)?;
    let density = simulate_ensemble(&problem, &ensemble, || DensityAccumulator::new(level, &[6, 12]))?.finish();

    println!("occupied bins at t = 1 (x, mass, exact ratio):");
    for j in 0..density.bins() {
        if density.counts(1)[j] > 0 {
            println!("  {:>8.4}  {:.6}  {}", density.bin_left_edge(j), density.mass(1, j), density.bin_mass(1, j..j + 1).ratio());
        }
    }
    println!("normalization: {}", density.normalization(1));

    let p = event_probability(&problem, &ensemble, 12, 0.0, f64::INFINITY)?;
    println!("P(x(1) >= 0) = {} = {:.6}", p.ratio(), p.value());

    let ou = CauchyProblem::from_sources("-x", "1", 1.0, GridLevel::new(64)?)?;
    let sampled = NoiseEnsemble::sample(ou.level, NoiseAlphabet::white(), 20_000, 3)?;
    let field = simulate_ensemble(&ou, &sampled, || DensityAccumulator::new(ou.level, &[0, 32, 64]))?.finish();
    let csv = field.to_csv();
    println!("\nOU density CSV: {} rows, header starts {:?}", csv.lines().count(), &csv[..40]);
    Ok(())
}
