use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("derivative undefined: grid function has {0} point(s), need at least 2")]
    DerivativeUndefined(usize),

    #[error("index range {start}..{end} outside grid function of length {len}")]
    Range { start: usize, end: usize, len: usize },

    #[error("non-finite value {value} at grid point {point}")]
    NonFinite { point: f64, value: f64 },

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("{0} is not a grid point at this level")]
    OffGrid(f64),

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("level mismatch: n={0} vs n={1}")]
    LevelMismatch(u32, u32),

    #[error("ensemble of {count} paths exceeds the cap of {cap}; use sampled mode")]
    CapExceeded { count: u128, cap: u128 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite functional value at path {0}")]
    NonFiniteFunctional(u64),

    #[error("trajectory diverged at step {step} (path {path}): |x| = {value}")]
    Diverged { path: u64, step: usize, value: f64 },

    #[error("stability violated: dt = {dt} exceeds the admissible {max_dt}")]
    Stability { dt: f64, max_dt: f64 },

    #[error("test function does not vanish at t = 1: {0}")]
    NotVanishing(String),

    #[error("incompatible bin alignment: {0}")]
    Alignment(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}
