//! Stochastic calculus on a finite grid.
//!
//! A level `n` fixes the step `1/n`. Time runs over `{0, 1/n, ..., 1}` and
//! space over a bounded window of the lattice `Z/n`. Functions, derivatives,
//! integrals, distributions, white noise and stochastic differential
//! equations are all finite objects at a fixed level. Limits are approached
//! by comparing results across increasing levels.

pub mod cli;
pub mod distrib;
pub mod error;
pub mod expr;
pub mod fokker_planck;
pub mod grid;
pub mod lemmas;
pub mod noise;
pub mod parallel;
pub mod sde;
pub mod sum;

pub use error::{Error, Result};
