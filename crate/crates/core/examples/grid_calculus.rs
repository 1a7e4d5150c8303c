//! Grid derivative, grid integral and the fundamental theorem on a finite
//! grid, plus level-indexed integral estimates.

use hypergrid::grid::{alpha_integral, fundamental_theorem_check, grid_derivative, grid_integral, GridFunction, GridLevel};

fn main() -> hypergrid::Result<()> {
    let level = GridLevel::new(64)?;
    let f = GridFunction::sample_time(level, |t| (3.0 * t).sin())?;

    let df = grid_derivative(&f)?;
    println!("Δf/Δt at t=0: {:.6} (cos 0 * 3 = 3)", df.values()[0]);

    let area = grid_integral(&f, 0..64)?;
    println!("I_[0,1)[sin 3t] = {area:.6}, exact {:.6}", (1.0 - 3f64.cos()) / 3.0);

    let (lhs, rhs) = fundamental_theorem_check(&f, 10, 50)?;
    println!("I_[10/64, 50/64)[Δf/Δt] = {lhs:.15}, f(50/64) - f(10/64) = {rhs:.15}");

    let g = f.integral_function();
    let back = grid_derivative(&g)?;
    let worst = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("Δ/Δt of the integral function recovers f up to {worst:e}");

    let smooth = alpha_integral(|x| x * x, 0.0, 1.0, &[64, 128, 256, 512], 1e-2)?;
    println!("x² on [0,1): {:?} converged={} estimate={:.6}", smooth.values, smooth.converged, smooth.estimate);

    // the rational indicator is 1 at every grid point
    let dirichlet = alpha_integral(|_| 1.0, 0.0, 1.0, &[64, 128, 256], 1e-9)?;
    println!("rational indicator: {:?}", dirichlet.values);
    Ok(())
}
