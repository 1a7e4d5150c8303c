//! Weak-form Fokker-Planck residual of the empirical density and its
//! decomposition into drift, noise and correction terms.

use hypergrid::expr::TestFunction;
use hypergrid::fokker_planck::weak_form_residual;
use hypergrid::grid::GridLevel;
use hypergrid::noise::{NoiseAlphabet, NoiseEnsemble, DEFAULT_CAP};
use hypergrid::sde::CauchyProblem;

fn main() -> hypergrid::Result<()> {
    let phi = TestFunction::standard();
    for (f, h) in [("0", "1"), ("-x", "1"), ("sin(x)", "1+x^2/4")] {
        println!("f = {f}, h = {h}");
        for n in [8u32, 12, 16] {
            let level = GridLevel::new(n)?;
            let problem = CauchyProblem::from_sources(f, h, 0.0, level)?;
            let ensemble = NoiseEnsemble::enumerate(level, NoiseAlphabet::white(), DEFAULT_CAP)?;
            let r = weak_form_residual(&problem, &ensemble, &phi)?;
            println!(
                "  n={n:>2} residual {:>11.3e}  pointwise {:>11.3e}  noise piece {:>9.1e}  decomposition error {:.1e}",
                r.residual, r.pointwise_residual, r.pieces.noise, r.decomposition_error
            );
        }
    }

    let level = GridLevel::new(32)?;
    let problem = CauchyProblem::from_sources("0", "1", 0.0, level)?;
    let ensemble = NoiseEnsemble::sample(level, NoiseAlphabet::white(), 50_000, 1)?;
    let r = weak_form_residual(&problem, &ensemble, &phi)?;
    println!(
        "\nsampled n=32: residual {:.3e} ± {:.1e}, noise piece {:.1e}",
        r.residual,
        r.residual_std_error.unwrap(),
        r.pieces.noise
    );
    Ok(())
}
