use serde::{Deserialize, Serialize};

use super::deriv::{add, div, mul, sub};
use super::{parse, symbolic_derivative, Expr, ExprError, Func, Var};

/// Closed rectangle outside of which a test function and its stored
/// derivatives vanish. Unbounded axes use infinite bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub t: (f64, f64),
    pub x: (f64, f64),
}

impl Support {
    pub fn contains(&self, t: f64, x: f64) -> bool {
        self.t.0 < t && t < self.t.1 && self.x.0 < x && x < self.x.1
    }

    fn intersect(self, other: Support) -> Support {
        Support {
            t: (self.t.0.max(other.t.0), self.t.1.min(other.t.1)),
            x: (self.x.0.max(other.x.0), self.x.1.min(other.x.1)),
        }
    }

    fn unbounded() -> Support {
        Support {
            t: (f64::NEG_INFINITY, f64::INFINITY),
            x: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

/// A smooth compactly supported `φ(t,x)` with its symbolic partials
/// `φ_t`, `φ_x`, `φ_xx`, `φ_xxx`.
///
/// Support comes from bump envelope factors `bump((v - c)/w)`, so every stored
/// derivative vanishes outside the rectangle as well. Evaluation outside the
/// open support rectangle returns exactly `0.0` without touching the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub expr: Expr,
    pub d_t: Expr,
    pub d_x: Expr,
    pub d_xx: Expr,
    pub d_xxx: Expr,
    pub support: Support,
}

fn envelope(var: Var, center: f64, halfwidth: f64) -> Expr {
    let v = Expr::Var(var);
    let shifted = if center == 0.0 {
        v
    } else {
        sub(v, Expr::Const(center))
    };
    Expr::call(Func::Bump(0), div(shifted, Expr::Const(halfwidth)))
}

impl TestFunction {
    fn build(expr: Expr, support: Support) -> Self {
        let d_t = symbolic_derivative(&expr, Var::T);
        let d_x = symbolic_derivative(&expr, Var::X);
        let d_xx = symbolic_derivative(&d_x, Var::X);
        let d_xxx = symbolic_derivative(&d_xx, Var::X);
        Self {
            expr,
            d_t,
            d_x,
            d_xx,
            d_xxx,
            support,
        }
    }

    /// `bump((t - tc)/wt) * bump((x - xc)/wx)`.
    pub fn bump(t_center: f64, t_halfwidth: f64, x_center: f64, x_halfwidth: f64) -> Self {
        Self::with_profile(Expr::Const(1.0), Some((t_center, t_halfwidth)), (x_center, x_halfwidth))
    }

    /// Time-independent `bump((x - xc)/wx)`.
    pub fn bump_x(x_center: f64, x_halfwidth: f64) -> Self {
        Self::with_profile(Expr::Const(1.0), None, (x_center, x_halfwidth))
    }

    /// `profile(t,x)` multiplied by bump envelopes in `x` and optionally `t`.
    pub fn with_profile(profile: Expr, t_envelope: Option<(f64, f64)>, x_envelope: (f64, f64)) -> Self {
        assert!(x_envelope.1 > 0.0, "envelope half-width must be positive");
        let mut support = Support::unbounded();
        let mut expr = profile;
        if let Some((tc, tw)) = t_envelope {
            assert!(tw > 0.0, "envelope half-width must be positive");
            expr = mul(expr, envelope(Var::T, tc, tw));
            support.t = (tc - tw, tc + tw);
        }
        let (xc, xw) = x_envelope;
        expr = mul(expr, envelope(Var::X, xc, xw));
        support.x = (xc - xw, xc + xw);
        Self::build(expr, support)
    }

    /// The default weak-form test function: centered at `(0.5, 0)` with
    /// half-widths `0.45` in time and `2` in space.
    pub fn standard() -> Self {
        Self::bump(0.5, 0.45, 0.0, 2.0)
    }

    /// Builds a test function from source text. The expression must be a
    /// product containing at least one `bump(a + b*x)` factor; factors of the
    /// form `bump(a + b*t)` bound the time support.
    pub fn from_source(source: &str) -> Result<Self, ExprError> {
        Self::from_expr(parse(source)?)
    }

    pub fn from_expr(expr: Expr) -> Result<Self, ExprError> {
        let mut factors = Vec::new();
        collect_factors(&expr, &mut factors);
        let mut support = Support::unbounded();
        let mut x_bounded = false;
        for f in factors {
            let Expr::Call(Func::Bump(0), arg) = f else {
                continue;
            };
            let Some((var, lo, hi)) = affine_support(arg) else {
                continue;
            };
            let s = match var {
                Var::T => Support {
                    t: (lo, hi),
                    ..Support::unbounded()
                },
                Var::X => {
                    x_bounded = true;
                    Support {
                        x: (lo, hi),
                        ..Support::unbounded()
                    }
                }
            };
            support = support.intersect(s);
        }
        if !x_bounded {
            return Err(ExprError::TestFunction(format!(
                "`{expr}` has no bump(a + b*x) envelope factor bounding its support in x"
            )));
        }
        Ok(Self::build(expr, support))
    }

    fn eval_guarded(&self, e: &Expr, t: f64, x: f64) -> Result<f64, ExprError> {
        if !self.support.contains(t, x) {
            return Ok(0.0);
        }
        e.eval(t, x)
    }

    pub fn value(&self, t: f64, x: f64) -> Result<f64, ExprError> {
        self.eval_guarded(&self.expr, t, x)
    }

    pub fn phi_t(&self, t: f64, x: f64) -> Result<f64, ExprError> {
        self.eval_guarded(&self.d_t, t, x)
    }

    pub fn phi_x(&self, t: f64, x: f64) -> Result<f64, ExprError> {
        self.eval_guarded(&self.d_x, t, x)
    }

    pub fn phi_xx(&self, t: f64, x: f64) -> Result<f64, ExprError> {
        self.eval_guarded(&self.d_xx, t, x)
    }

    pub fn phi_xxx(&self, t: f64, x: f64) -> Result<f64, ExprError> {
        self.eval_guarded(&self.d_xxx, t, x)
    }

    /// Sum of two test functions; the support is the bounding rectangle.
    pub fn sum(&self, other: &TestFunction) -> TestFunction {
        let support = Support {
            t: (self.support.t.0.min(other.support.t.0), self.support.t.1.max(other.support.t.1)),
            x: (self.support.x.0.min(other.support.x.0), self.support.x.1.max(other.support.x.1)),
        };
        Self::build(add(self.expr.clone(), other.expr.clone()), support)
    }

    pub fn scaled(&self, c: f64) -> TestFunction {
        Self::build(mul(Expr::Const(c), self.expr.clone()), self.support)
    }
}

fn collect_factors<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Mul(a, b) => {
            collect_factors(a, out);
            collect_factors(b, out);
        }
        Expr::Div(a, _) => collect_factors(a, out),
        other => out.push(other),
    }
}

/// If `u` is affine in exactly one variable, the open interval where `|u| < 1`.
fn affine_support(u: &Expr) -> Option<(Var, f64, f64)> {
    let var = match (u.depends_on(Var::T), u.depends_on(Var::X)) {
        (true, false) => Var::T,
        (false, true) => Var::X,
        _ => return None,
    };
    let slope = symbolic_derivative(u, var).as_const()?;
    if slope == 0.0 {
        return None;
    }
    let intercept = u.eval(0.0, 0.0).ok()?;
    let a = (-1.0 - intercept) / slope;
    let b = (1.0 - intercept) / slope;
    Some((var, a.min(b), a.max(b)))
}
