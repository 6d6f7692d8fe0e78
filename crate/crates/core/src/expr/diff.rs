use super::{pow, Expr, ExprKind, Func, Variable};

/// Exact derivative of `e` with respect to `var`.
///
/// Results are lightly simplified: `0*e -> 0`, `1*e -> e`, `e+0 -> e`,
/// `e^1 -> e`, `e^0 -> 1`, and operations on two literals are folded when
/// the result is finite.
pub fn differentiate(e: &Expr, var: &Variable) -> Expr {
    if !e.depends_on(var) {
        return Expr::num(0.0);
    }
    match &e.kind {
        ExprKind::Num(_) => Expr::num(0.0),
        ExprKind::Time | ExprKind::Var(_) | ExprKind::Param(_) => Expr::num(1.0),
        ExprKind::Neg(a) => neg(differentiate(a, var)),
        ExprKind::Add(a, b) => add(differentiate(a, var), differentiate(b, var)),
        ExprKind::Sub(a, b) => sub(differentiate(a, var), differentiate(b, var)),
        ExprKind::Mul(a, b) => add(
            mul(differentiate(a, var), (**b).clone()),
            mul((**a).clone(), differentiate(b, var)),
        ),
        ExprKind::Div(a, b) => {
            // (a'b - ab') / b^2
            let num = sub(
                mul(differentiate(a, var), (**b).clone()),
                mul((**a).clone(), differentiate(b, var)),
            );
            div(num, power((**b).clone(), Expr::num(2.0)))
        }
        ExprKind::Pow(a, b) => {
            if !b.depends_on(var) {
                // b * a^(b-1) * a'
                let reduced = power((**a).clone(), sub((**b).clone(), Expr::num(1.0)));
                mul(mul((**b).clone(), reduced), differentiate(a, var))
            } else {
                // a^b * (b' log a + b a'/a)
                let log_term = mul(differentiate(b, var), call(Func::Log, (**a).clone()));
                let ratio = div(mul((**b).clone(), differentiate(a, var)), (**a).clone());
                mul(e.clone(), add(log_term, ratio))
            }
        }
        ExprKind::Call(func, a) => {
            let inner = differentiate(a, var);
            let arg = (**a).clone();
            let outer = match func {
                Func::Sin => call(Func::Cos, arg),
                Func::Cos => neg(call(Func::Sin, arg)),
                Func::Tan => div(
                    Expr::num(1.0),
                    power(call(Func::Cos, arg), Expr::num(2.0)),
                ),
                Func::Exp => call(Func::Exp, arg),
                Func::Log => div(Expr::num(1.0), arg),
                Func::Sqrt => div(Expr::num(1.0), mul(Expr::num(2.0), call(Func::Sqrt, arg))),
                Func::Abs => call(Func::Sign, arg),
                Func::Sign => Expr::num(0.0),
            };
            mul(outer, inner)
        }
    }
}

fn finite(v: f64) -> Option<Expr> {
    v.is_finite().then(|| Expr::num(v))
}

fn neg(a: Expr) -> Expr {
    match a.kind {
        ExprKind::Num(v) => Expr::num(-v),
        ExprKind::Neg(inner) => *inner,
        _ => Expr::new(ExprKind::Neg(Box::new(a))),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => finite(x + y).unwrap_or_else(|| raw_add(a, b)),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => match b.kind {
            ExprKind::Neg(inner) => sub(a, *inner),
            _ => raw_add(a, b),
        },
    }
}

fn raw_add(a: Expr, b: Expr) -> Expr {
    Expr::new(ExprKind::Add(Box::new(a), Box::new(b)))
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => {
            finite(x - y).unwrap_or_else(|| Expr::new(ExprKind::Sub(Box::new(a), Box::new(b))))
        }
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::new(ExprKind::Sub(Box::new(a), Box::new(b))),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => {
            finite(x * y).unwrap_or_else(|| Expr::new(ExprKind::Mul(Box::new(a), Box::new(b))))
        }
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => match (a.kind, b.kind) {
            (ExprKind::Neg(x), kb) => neg(mul(*x, Expr::new(kb))),
            (ka, ExprKind::Neg(y)) => neg(mul(Expr::new(ka), *y)),
            (ka, kb) => Expr::new(ExprKind::Mul(Box::new(Expr::new(ka)), Box::new(Expr::new(kb)))),
        },
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) if y != 0.0 => {
            finite(x / y).unwrap_or_else(|| Expr::new(ExprKind::Div(Box::new(a), Box::new(b))))
        }
        (Some(x), _) if x == 0.0 => Expr::num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::new(ExprKind::Div(Box::new(a), Box::new(b))),
    }
}

fn power(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => {
            finite(pow(x, y)).unwrap_or_else(|| Expr::new(ExprKind::Pow(Box::new(a), Box::new(b))))
        }
        (_, Some(y)) if y == 0.0 => Expr::num(1.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::new(ExprKind::Pow(Box::new(a), Box::new(b))),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    if let Some(v) = a.as_num() {
        if let Ok(r) = f.apply(v) {
            if r.is_finite() {
                return Expr::num(r);
            }
        }
    }
    Expr::new(ExprKind::Call(f, Box::new(a)))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::expr::parse;

    fn d(src: &str, var: Variable) -> Expr {
        differentiate(&parse(src).unwrap(), &var)
    }

    #[test]
    fn power_rule_prints_compactly() {
        let e = d("x1^2", Variable::State(0));
        assert_eq!(e.to_string(), "2*x1");
        assert_eq!(e.eval(0.0, &[3.0], &BTreeMap::new()).unwrap(), 6.0);
    }

    #[test]
    fn circle_system_partial() {
        let e = d("-x2 + x1*(1 - x1^2 - x2^2)", Variable::State(1));
        assert_eq!(e.eval(0.0, &[1.0, 0.0], &BTreeMap::new()).unwrap(), -1.0);
    }

    #[test]
    fn abs_derivative_is_zero_at_origin() {
        let e = d("abs(x1)", Variable::State(0));
        let p = BTreeMap::new();
        assert_eq!(e.eval(0.0, &[0.0], &p).unwrap(), 0.0);
        assert_eq!(e.eval(0.0, &[-2.0], &p).unwrap(), -1.0);
    }

    #[test]
    fn time_and_parameter_derivatives() {
        let mut p = BTreeMap::new();
        p.insert("lam".to_string(), 2.0);
        let e = d("lam*cos(t)", Variable::Time);
        assert!((e.eval(0.5, &[], &p).unwrap() + 2.0 * 0.5f64.sin()).abs() < 1e-15);
        let e = d("lam^2*x1", Variable::Param("lam".into()));
        assert_eq!(e.eval(0.0, &[3.0], &p).unwrap(), 12.0);
    }

    #[test]
    fn independent_expression_is_zero() {
        assert_eq!(d("sin(x2)*t", Variable::State(0)), Expr::num(0.0));
    }
}
