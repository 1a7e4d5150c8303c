//! Exhaustive and sampled coin-flip noise, conditional blocks and the exact
//! expectation identities.

use hypergrid::grid::GridLevel;
use hypergrid::lemmas::verify_lemmas;
use hypergrid::noise::{NoiseAlphabet, NoiseEnsemble, DEFAULT_CAP};
use hypergrid::sde::CauchyProblem;

fn main() -> hypergrid::Result<()> {
    let level = GridLevel::new(8)?;
    let white = NoiseEnsemble::enumerate(level, NoiseAlphabet::white(), DEFAULT_CAP)?;
    println!("exhaustive white noise at n=8: {} paths of length {}", white.count(), white.path_len());
    println!("first path: {:?}", white.path(0).values);

    let prefix = white.path(300).restrict(3);
    let block = white.conditional(&prefix)?;
    println!("paths agreeing with {:?}: {} (indices {:?})", prefix.values, block.count(), block.indices());

    let sq = white.expectation(|p| p.values[4] * p.values[4])?;
    let cross = white.expectation(|p| p.values[2] * p.values[6])?;
    println!("E[ξ(4/8)²] = {}, E[ξ(2/8) ξ(6/8)] = {}", sq.mean, cross.mean);

    let sampled = NoiseEnsemble::sample(level, NoiseAlphabet::white(), 100_000, 42)?;
    let m = sampled.expectation(|p| p.values[2] * p.values[6])?;
    println!("sampled E[ξ(2/8) ξ(6/8)] = {:.4} ± {:.4}", m.mean, m.std_error.unwrap());

    let three = NoiseAlphabet::normalized(&[-2.0, 0.5, 1.5])?;
    println!("normalized three-symbol alphabet: {:?}", three.symbols());

    let problem = CauchyProblem::from_sources("-x", "1+x^2/4", 0.3, level)?;
    let report = verify_lemmas(&problem, &white, 1e-10)?;
    println!(
        "{} exact identities, all passed: {}, max relative error {:e}",
        report.checks.len(),
        report.passed,
        report.max_relative_error
    );
    Ok(())
}
