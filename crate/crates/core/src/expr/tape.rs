use std::collections::BTreeMap;

use super::{pow, EvalError, EvalErrorKind, Expr, ExprKind, Func};

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Time,
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    /// Index into `Tape::labels` for error reporting.
    Div(u32),
    PowInt(i32),
    Pow(u32),
    Call(Func, u32),
}

/// Postfix compilation of an [`Expr`] with parameters bound to constants.
/// Evaluates with the same floating-point operations as the tree walker.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    labels: Vec<String>,
    depth: usize,
}

const INLINE_STACK: usize = 32;

impl Tape {
    pub fn compile(e: &Expr, params: &BTreeMap<String, f64>) -> Result<Tape, EvalError> {
        let mut tape = Tape {
            ops: Vec::new(),
            labels: Vec::new(),
            depth: 0,
        };
        let mut depth = 0;
        tape.emit(e, params, &mut depth)?;
        Ok(tape)
    }

    fn push(&mut self, op: Op, depth: &mut usize, delta: isize) {
        self.ops.push(op);
        *depth = (*depth as isize + delta) as usize;
        self.depth = self.depth.max(*depth);
    }

    fn label(&mut self, e: &Expr) -> u32 {
        self.labels.push(e.to_string());
        (self.labels.len() - 1) as u32
    }

    fn emit(
        &mut self,
        e: &Expr,
        params: &BTreeMap<String, f64>,
        depth: &mut usize,
    ) -> Result<(), EvalError> {
        match &e.kind {
            ExprKind::Num(v) => self.push(Op::Const(*v), depth, 1),
            ExprKind::Time => self.push(Op::Time, depth, 1),
            ExprKind::Var(i) => self.push(Op::Var(*i), depth, 1),
            ExprKind::Param(p) => {
                let v = match params.get(p) {
                    Some(v) => *v,
                    None if p == "pi" => std::f64::consts::PI,
                    None => {
                        return Err(EvalError {
                            kind: EvalErrorKind::UnboundParameter,
                            subexpr: p.clone(),
                        })
                    }
                };
                self.push(Op::Const(v), depth, 1)
            }
            ExprKind::Neg(a) => {
                self.emit(a, params, depth)?;
                self.push(Op::Neg, depth, 0)
            }
            ExprKind::Call(f, a) => {
                self.emit(a, params, depth)?;
                let l = self.label(e);
                self.push(Op::Call(*f, l), depth, 0)
            }
            ExprKind::Pow(a, b) => {
                self.emit(a, params, depth)?;
                match b.as_num() {
                    Some(n) if n.fract() == 0.0 && n.abs() <= 64.0 => {
                        self.push(Op::PowInt(n as i32), depth, 0)
                    }
                    _ => {
                        self.emit(b, params, depth)?;
                        let l = self.label(e);
                        self.push(Op::Pow(l), depth, -1)
                    }
                }
            }
            ExprKind::Add(a, b)
            | ExprKind::Sub(a, b)
            | ExprKind::Mul(a, b)
            | ExprKind::Div(a, b) => {
                self.emit(a, params, depth)?;
                self.emit(b, params, depth)?;
                let op = match &e.kind {
                    ExprKind::Add(..) => Op::Add,
                    ExprKind::Sub(..) => Op::Sub,
                    ExprKind::Mul(..) => Op::Mul,
                    _ => Op::Div(self.label(e)),
                };
                self.push(op, depth, -1)
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        if self.depth <= INLINE_STACK {
            let mut stack = [0.0; INLINE_STACK];
            self.run(t, x, &mut stack)
        } else {
            let mut stack = vec![0.0; self.depth];
            self.run(t, x, &mut stack)
        }
    }

    fn fail(&self, kind: EvalErrorKind, label: u32) -> EvalError {
        EvalError {
            kind,
            subexpr: self.labels[label as usize].clone(),
        }
    }

    fn run(&self, t: f64, x: &[f64], stack: &mut [f64]) -> Result<f64, EvalError> {
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(v) => {
                    stack[sp] = v;
                    sp += 1;
                }
                Op::Time => {
                    stack[sp] = t;
                    sp += 1;
                }
                Op::Var(i) => {
                    stack[sp] = *x.get(i).ok_or(EvalError {
                        kind: EvalErrorKind::StateIndex,
                        subexpr: format!("x{}", i + 1),
                    })?;
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::PowInt(n) => stack[sp - 1] = stack[sp - 1].powi(n),
                Op::Call(f, l) => {
                    stack[sp - 1] = f.apply(stack[sp - 1]).map_err(|k| self.fail(k, l))?
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div(_) | Op::Pow(_) => {
                    let b = stack[sp - 1];
                    let a = stack[sp - 2];
                    sp -= 1;
                    stack[sp - 1] = match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div(l) => {
                            if b == 0.0 {
                                return Err(self.fail(EvalErrorKind::DivisionByZero, l));
                            }
                            a / b
                        }
                        Op::Pow(l) => {
                            let r = pow(a, b);
                            if r.is_nan() {
                                return Err(self.fail(EvalErrorKind::PowDomain, l));
                            }
                            r
                        }
                        _ => unreachable!(),
                    };
                }
            }
        }
        Ok(stack[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn tape_matches_tree_bitwise() {
        let mut params = BTreeMap::new();
        params.insert("lam".to_string(), 0.75);
        for src in [
            "-x2 + x1*(1 - x1^2 - x2^2)",
            "(1 - x1^2)*x2 + lam*cos(t)",
            "exp(-t/3)*sqrt(abs(x1)) - tan(x2)^3",
            "x1^x2 + 2^-x1",
            "((((((((((((((((((((((((((((((((((x1))))))))))))))))))))))))))))))))))+1",
        ] {
            let e = parse(src).unwrap();
            let tape = Tape::compile(&e, &params).unwrap();
            for (t, x) in [(0.3, [0.7, 1.1]), (2.0, [1.5, -0.2]), (-1.0, [0.1, 0.4])] {
                let a = tape.eval(t, &x).unwrap();
                let b = e.eval(t, &x, &params).unwrap();
                assert_eq!(a.to_bits(), b.to_bits(), "{src}");
            }
        }
    }

    #[test]
    fn deep_expression_uses_heap_stack() {
        let src = "(x1+".repeat(40) + "x1" + &")".repeat(40);
        let e = parse(&src).unwrap();
        let tape = Tape::compile(&e, &BTreeMap::new()).unwrap();
        assert!(tape.depth > INLINE_STACK);
        assert_eq!(tape.eval(0.0, &[1.0]).unwrap(), e.eval(0.0, &[1.0], &BTreeMap::new()).unwrap());
    }

    #[test]
    fn unbound_parameter_fails_at_compile() {
        let e = parse("mu*x1").unwrap();
        assert!(Tape::compile(&e, &BTreeMap::new()).is_err());
    }

    #[test]
    fn runtime_domain_error() {
        let e = parse("sqrt(x1)").unwrap();
        let tape = Tape::compile(&e, &BTreeMap::new()).unwrap();
        let err = tape.eval(0.0, &[-1.0]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::SqrtDomain);
        assert_eq!(err.subexpr, "sqrt(x1)");
    }
}
