use super::{Expr, Func, Var};

/// Exact partial derivative with respect to `var`.
///
/// Results are lightly simplified (constant folding, `0`/`1` identities) so
/// that repeated differentiation does not blow up the tree.
pub fn symbolic_derivative(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(symbolic_derivative(a, var)),
        Expr::Add(a, b) => add(symbolic_derivative(a, var), symbolic_derivative(b, var)),
        Expr::Sub(a, b) => sub(symbolic_derivative(a, var), symbolic_derivative(b, var)),
        Expr::Mul(a, b) => add(
            mul(symbolic_derivative(a, var), (**b).clone()),
            mul((**a).clone(), symbolic_derivative(b, var)),
        ),
        Expr::Div(a, b) => {
            let da = symbolic_derivative(a, var);
            let db = symbolic_derivative(b, var);
            if is_zero(&db) {
                return div(da, (**b).clone());
            }
            div(
                sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                pow((**b).clone(), 2),
            )
        }
        Expr::Pow(a, k) => {
            if *k == 0 {
                return Expr::Const(0.0);
            }
            mul(
                mul(Expr::Const(f64::from(*k)), pow((**a).clone(), k - 1)),
                symbolic_derivative(a, var),
            )
        }
        Expr::Call(f, a) => {
            let da = symbolic_derivative(a, var);
            if is_zero(&da) {
                return Expr::Const(0.0);
            }
            let u = (**a).clone();
            let outer = match f {
                Func::Sin => Expr::call(Func::Cos, u),
                Func::Cos => neg(Expr::call(Func::Sin, u)),
                Func::Exp => Expr::call(Func::Exp, u),
                Func::Log => return div(da, u),
                Func::Sqrt => {
                    return div(da, mul(Expr::Const(2.0), Expr::call(Func::Sqrt, u)));
                }
                Func::Bump(k) => Expr::call(Func::Bump(k + 1), u),
            };
            mul(outer, da)
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    e.as_const() == Some(0.0)
}

fn is_one(e: &Expr) -> bool {
    e.as_const() == Some(1.0)
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        return Expr::Const(0.0);
    }
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        _ if is_one(&a) => b,
        _ if is_one(&b) => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return Expr::Const(0.0);
    }
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        _ if is_one(&b) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, k: u32) -> Expr {
    match (k, a.as_const()) {
        (0, _) => Expr::Const(1.0),
        (1, _) => a,
        (_, Some(c)) => Expr::Const(c.powi(k as i32)),
        _ => Expr::Pow(Box::new(a), k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn d(src: &str, var: Var) -> String {
        symbolic_derivative(&parse(src).unwrap(), var).to_string()
    }

    #[test]
    fn textbook_rules() {
        assert_eq!(d("x^2", Var::X), "2*x");
        assert_eq!(d("sin(t)*x", Var::T), "cos(t)*x");
        assert_eq!(d("sin(t)*x", Var::X), "sin(t)");
        assert_eq!(d("exp(2*x)", Var::X), "exp(2*x)*2");
        assert_eq!(d("x^0", Var::X), "0");
        assert_eq!(d("t", Var::X), "0");
        assert_eq!(d("bump(x/2)", Var::X), "bump1(x/2)*0.5");
    }

    #[test]
    fn bump_derivative_matches_central_difference() {
        let e = parse("bump(x)").unwrap();
        let de = symbolic_derivative(&e, Var::X);
        let h = 1e-6;
        let fd = (e.eval(0.0, 0.5 + h).unwrap() - e.eval(0.0, 0.5 - h).unwrap()) / (2.0 * h);
        let exact = de.eval(0.0, 0.5).unwrap();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs());
    }

    #[test]
    fn quotient_and_chain_rules() {
        let e = parse("log(1 + x^2)/(2 + sin(t*x))").unwrap();
        for var in [Var::T, Var::X] {
            let de = symbolic_derivative(&e, var);
            let (t, x) = (0.3, 0.7);
            let h = 1e-6;
            let fd = match var {
                Var::T => (e.eval(t + h, x).unwrap() - e.eval(t - h, x).unwrap()) / (2.0 * h),
                Var::X => (e.eval(t, x + h).unwrap() - e.eval(t, x - h).unwrap()) / (2.0 * h),
            };
            assert!((fd - de.eval(t, x).unwrap()).abs() < 1e-8);
        }
    }
}
