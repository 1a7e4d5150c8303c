//! Parsing expressions, exact symbolic derivatives and compactly supported
//! test functions.

use hypergrid::expr::{parse, symbolic_derivative, TestFunction, Var};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let e = parse("exp(-x^2)*sin(2*t) + x/(1+t^2)")?;
    println!("e        = {e}");
    println!("de/dx    = {}", symbolic_derivative(&e, Var::X));
    println!("de/dt    = {}", symbolic_derivative(&e, Var::T));
    println!("e(0.5,1) = {}", e.eval(0.5, 1.0)?);

    match parse("log(x)")?.eval(0.0, -1.0) {
        Ok(v) => println!("log(-1) = {v}"),
        Err(err) => println!("domain error: {err}"),
    }

    let phi = TestFunction::standard();
    println!("\nstandard φ = {}", phi.expr);
    println!("support t ∈ {:?}, x ∈ {:?}", phi.support.t, phi.support.x);
    for (t, x) in [(0.5, 0.0), (0.5, 1.0), (0.2, -0.5), (0.99, 0.0)] {
        println!(
            "φ({t}, {x}) = {:.6}  φ_t = {:.6}  φ_x = {:.6}  φ_xx = {:.6}",
            phi.value(t, x)?,
            phi.phi_t(t, x)?,
            phi.phi_x(t, x)?,
            phi.phi_xx(t, x)?
        );
    }

    let custom = TestFunction::from_source("x*bump((t-0.5)/0.4)*bump(x/3)")?;
    println!("\ncustom φ support x ∈ {:?}, φ_xxx(0.5, 1) = {:.6}", custom.support.x, custom.phi_xxx(0.5, 1.0)?);
    Ok(())
}
