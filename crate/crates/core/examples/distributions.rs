//! Grid functions acting as distributions: the delta, its derivative, and a
//! grid function whose pairings grow without bound.

use hypergrid::distrib::{default_family, dirac, dirac_derivative, equivalent, pair, split_dirac};
use hypergrid::expr::TestFunction;
use hypergrid::grid::{Axis, GridLevel};

fn main() -> hypergrid::Result<()> {
    let phi = TestFunction::bump_x(0.3, 1.0);
    let slope = phi.phi_x(0.0, 0.0)?;
    println!("φ(0) = {:.12}, -φ'(0) = {:.12}", phi.value(0.0, 0.0)?, -slope);
    println!("{:>5} {:>16} {:>16} {:>12}", "n", "<δ,φ>", "<δ',φ>", "<nδ,φ>");
    for n in [16u32, 64, 256, 1024] {
        let level = GridLevel::new(n)?;
        let delta = dirac(level, Axis::Space, 0.0)?;
        let d1 = dirac_derivative(level, Axis::Space, 0.0)?;
        let big = delta.scale(f64::from(n))?;
        println!(
            "{n:>5} {:>16.12} {:>16.12} {:>12.4}",
            pair(&delta, &phi, 0.0)?,
            pair(&d1, &phi, 0.0)?,
            pair(&big, &phi, 0.0)?
        );
    }

    let level = GridLevel::new(256)?;
    let family = default_family();
    let a = dirac(level, Axis::Space, 0.0)?;
    let b = split_dirac(level, Axis::Space, 0.0)?;
    let r = equivalent(&a, &b, &family, 0.0, 10.0 / 256.0)?;
    println!("\nδ vs split δ at n=256: equivalent={} max discrepancy {:e}", r.equivalent, r.max_discrepancy);
    let c = dirac_derivative(level, Axis::Space, 0.0)?;
    let r = equivalent(&a, &c, &family, 0.0, 10.0 / 256.0)?;
    println!("δ vs δ' at n=256: equivalent={} max discrepancy {:.3}", r.equivalent, r.max_discrepancy);
    Ok(())
}
