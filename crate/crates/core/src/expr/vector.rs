use std::collections::BTreeMap;

use super::{differentiate, parse_in, Expr, ExprKind, ParseError, Scope, Variable};

/// `k` scalar component expressions plus declared parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorExpr {
    pub components: Vec<Expr>,
    pub params: BTreeMap<String, f64>,
}

impl VectorExpr {
    /// Parses one source string per component; every identifier must be
    /// `t`, `x1..xk`, `pi` or a key of `params`.
    pub fn parse<S: AsRef<str>>(
        sources: &[S],
        params: BTreeMap<String, f64>,
    ) -> Result<Self, ParseError> {
        let scope = Scope::new(sources.len(), params.keys().cloned());
        let components = sources
            .iter()
            .map(|s| parse_in(s.as_ref(), &scope))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorExpr { components, params })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Row-major symbolic Jacobian: entry `(i, j)` is `d component_i / d x_j`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.components
            .iter()
            .map(|c| {
                (0..self.dim())
                    .map(|j| differentiate(c, &Variable::State(j)))
                    .collect()
            })
            .collect()
    }

    /// Printable trace of the Jacobian.
    pub fn divergence(&self) -> Expr {
        let jac = self.jacobian();
        let mut terms = jac
            .into_iter()
            .enumerate()
            .map(|(i, mut row)| row.swap_remove(i))
            .filter(|e| e.as_num() != Some(0.0));
        let Some(first) = terms.next() else {
            return Expr::num(0.0);
        };
        terms.fold(first, |acc, e| match e.kind {
            ExprKind::Neg(inner) => Expr::new(ExprKind::Sub(Box::new(acc), inner)),
            kind => Expr::new(ExprKind::Add(Box::new(acc), Box::new(Expr::new(kind)))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_count_sets_dimension() {
        let v = VectorExpr::parse(&["-x2", "x1"], BTreeMap::new()).unwrap();
        assert_eq!(v.dim(), 2);
        assert_eq!(v.divergence(), Expr::num(0.0));
        assert!(VectorExpr::parse(&["x3", "x1"], BTreeMap::new()).is_err());
    }

    #[test]
    fn circle_divergence_on_unit_circle() {
        let v = VectorExpr::parse(
            &["-x2 + x1*(1 - x1^2 - x2^2)", "x1 + x2*(1 - x1^2 - x2^2)"],
            BTreeMap::new(),
        )
        .unwrap();
        let div = v.divergence();
        for a in [0.0, 0.4, 2.0, 4.5] {
            let x = [f64::cos(a), f64::sin(a)];
            let d = div.eval(0.0, &x, &v.params).unwrap();
            assert!((d + 2.0).abs() < 1e-14, "{d}");
        }
        // 2(1 - r^2) - 2 r^2 off the circle
        let x = [0.3, 0.4];
        let r2 = 0.25;
        let d = div.eval(0.0, &x, &v.params).unwrap();
        assert!((d - (2.0 * (1.0 - r2) - 2.0 * r2)).abs() < 1e-14);
    }
}
