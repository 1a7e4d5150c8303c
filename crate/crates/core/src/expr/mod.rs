//! Expression language for drift `f(t,x)`, diffusion `h(t,x)` and test
//! functions `φ(t,x)`.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := unary ('^' integer)?
//! unary   := '-'? primary
//! primary := number | 't' | 'x' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt | bump | bump1 | bump2 | ...
//! ```
//!
//! `bump(u) = exp(-1/(1-u²))` for `|u| < 1` and `0` otherwise; `bumpK` is its
//! K-th derivative, which keeps differentiation closed-form and the support
//! intact. Note that unary minus binds tighter than `^`: `-x^2` is `(-x)^2`.

mod deriv;
mod parse;
mod test_function;

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use deriv::symbolic_derivative;
pub use parse::parse;
pub use test_function::{Support, TestFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("non-constant exponent at byte {offset}")]
    NonConstantExponent { offset: usize },

    #[error("exponent at byte {offset} must be a non-negative integer, got {value}")]
    InvalidExponent { offset: usize, value: f64 },

    #[error("domain error in `{expr}`: {message}")]
    Domain { expr: String, message: String },

    #[error("invalid test function: {0}")]
    TestFunction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    T,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    /// `Bump(k)` is the k-th derivative of the bump profile.
    Bump(u32),
}

impl Func {
    fn name(&self) -> String {
        match self {
            Func::Sin => "sin".into(),
            Func::Cos => "cos".into(),
            Func::Exp => "exp".into(),
            Func::Log => "log".into(),
            Func::Sqrt => "sqrt".into(),
            Func::Bump(0) => "bump".into(),
            Func::Bump(k) => format!("bump{k}"),
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "bump" => Func::Bump(0),
            _ => {
                let digits = name.strip_prefix("bump")?;
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                Func::Bump(digits.parse().ok()?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn t() -> Expr {
        Expr::Var(Var::T)
    }

    pub fn x() -> Expr {
        Expr::Var(Var::X)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Evaluates at `(t, x)`. Division by zero, `log` of a non-positive number
    /// and `sqrt` of a negative number are domain errors naming the offending
    /// sub-expression.
    pub fn eval(&self, t: f64, x: f64) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::X) => x,
            Expr::Neg(a) => -a.eval(t, x)?,
            Expr::Add(a, b) => a.eval(t, x)? + b.eval(t, x)?,
            Expr::Sub(a, b) => a.eval(t, x)? - b.eval(t, x)?,
            Expr::Mul(a, b) => a.eval(t, x)? * b.eval(t, x)?,
            Expr::Div(a, b) => {
                let den = b.eval(t, x)?;
                if den == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                a.eval(t, x)? / den
            }
            Expr::Pow(a, k) => a.eval(t, x)?.powi(*k as i32),
            Expr::Call(f, a) => {
                let u = a.eval(t, x)?;
                match f {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return Err(self.domain("logarithm of a non-positive number"));
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(self.domain("square root of a negative number"));
                        }
                        u.sqrt()
                    }
                    Func::Bump(k) => bump_derivative(*k, u),
                }
            }
        };
        if v.is_nan() {
            return Err(self.domain("result is not a number"));
        }
        Ok(v)
    }

    fn domain(&self, message: &str) -> ExprError {
        ExprError::Domain {
            expr: self.to_string(),
            message: message.into(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => SUM,
            Expr::Mul(..) | Expr::Div(..) => PRODUCT,
            Expr::Pow(..) => FACTOR,
            Expr::Neg(_) => UNARY,
            Expr::Const(c) if c.is_sign_negative() => UNARY,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => PRIMARY,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.write_at(f, SUM)?;
            return write!(f, ")");
        }
        match self {
            Expr::Const(c) if c.is_sign_negative() => write!(f, "-{}", -c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_at(f, PRIMARY)
            }
            Expr::Add(a, b) => {
                a.write_at(f, SUM)?;
                write!(f, " + ")?;
                b.write_at(f, PRODUCT)
            }
            Expr::Sub(a, b) => {
                a.write_at(f, SUM)?;
                write!(f, " - ")?;
                b.write_at(f, PRODUCT)
            }
            Expr::Mul(a, b) => {
                a.write_at(f, PRODUCT)?;
                write!(f, "*")?;
                b.write_at(f, FACTOR)
            }
            Expr::Div(a, b) => {
                a.write_at(f, PRODUCT)?;
                write!(f, "/")?;
                b.write_at(f, FACTOR)
            }
            Expr::Pow(a, k) => {
                a.write_at(f, UNARY)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_at(f, SUM)?;
                write!(f, ")")
            }
        }
    }
}

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const FACTOR: u8 = 3;
const UNARY: u8 = 4;
const PRIMARY: u8 = 5;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, SUM)
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// `bump(u) = exp(-1/(1-u²))` inside `|u| < 1`, zero outside.
pub fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// k-th derivative of [`bump`]: `bump(u) * P_k(u) / (1-u²)^(2k)`.
pub fn bump_derivative(k: u32, u: f64) -> f64 {
    let b = bump(u);
    if k == 0 || b == 0.0 {
        return b;
    }
    let q = 1.0 - u * u;
    let p = bump_polynomial(k);
    let poly = p.iter().rev().fold(0.0, |acc, c| acc * u + c);
    b * poly / q.powi(2 * k as i32)
}

const CACHED_BUMP_ORDERS: usize = 16;

/// Coefficients (ascending powers) of `P_k` with
/// `P_{k+1} = -2u P_k + (1-u²)² P_k' + 4k u (1-u²) P_k`.
fn bump_polynomial(k: u32) -> std::borrow::Cow<'static, [f64]> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut out = vec![vec![1.0]];
        for j in 0..CACHED_BUMP_ORDERS as u32 {
            let next = next_bump_polynomial(out.last().unwrap(), j);
            out.push(next);
        }
        out
    });
    if let Some(p) = table.get(k as usize) {
        return std::borrow::Cow::Borrowed(p.as_slice());
    }
    let mut p = table.last().unwrap().clone();
    for j in table.len() as u32 - 1..k {
        p = next_bump_polynomial(&p, j);
    }
    std::borrow::Cow::Owned(p)
}

fn next_bump_polynomial(p: &[f64], k: u32) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 4];
    // q = 1 - u², q² = 1 - 2u² + u⁴
    for (i, c) in p.iter().enumerate() {
        // -2u P
        out[i + 1] += -2.0 * c;
        // 4k u q P = 4k (u - u³) P
        out[i + 1] += 4.0 * k as f64 * c;
        out[i + 3] -= 4.0 * k as f64 * c;
        // q² P'
        if i > 0 {
            let d = i as f64 * c;
            out[i - 1] += d;
            out[i + 1] -= 2.0 * d;
            out[i + 3] += d;
        }
    }
    while out.len() > 1 && *out.last().unwrap() == 0.0 {
        out.pop();
    }
    out
}
