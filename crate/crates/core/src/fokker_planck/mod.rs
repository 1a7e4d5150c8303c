//! Checks of the Fokker-Planck connection.
//!
//! Three independent routes are provided. [`ito_residual`] measures the
//! discrete chain rule along a single trajectory, [`weak_form_residual`]
//! evaluates the distributional form of the equation against the empirical
//! density of an ensemble, and [`fp_solve`] integrates the equation
//!
//! ```text
//! ∂P/∂t = ½ ∂²(h² P)/∂x² - ∂(f P)/∂x,   P(0) = δ_{x0}
//! ```
//!
//! by finite volumes so that [`cross_validate`] can compare the two
//! densities. The solver shares nothing with the simulator except expression
//! evaluation.

mod crossval;
mod ito;
mod solver;
mod weak;

pub use crossval::{compare, cross_validate, CrossValidationReport};
pub use ito::{ito_residual, ItoReport};
pub use solver::{admissible_dt, fp_solve, FPSolution, FpParams};
pub use weak::{weak_form_residual, WeakFormPieces, WeakFormReport};
