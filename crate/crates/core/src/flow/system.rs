use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{EvalError, Tape, VectorExpr};

/// Where a field's Jacobian comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianSource {
    /// Symbolic differentiation of the defining expressions.
    Exact,
    /// Central differences with step `1e-6 * (1 + |x_i|)`.
    FiniteDifference,
}

/// A time-dependent vector field on `R^k` with a Jacobian in `x`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError>;

    /// Row-major `k x k` Jacobian `d out_i / d x_j`.
    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError>;

    fn jacobian_source(&self) -> JacobianSource;

    fn expressions(&self) -> Option<&VectorExpr> {
        None
    }
}

/// Field defined by expressions; Jacobian entries are compiled derivative ASTs.
pub struct ExprField {
    expr: VectorExpr,
    tapes: Vec<Tape>,
    jac: Vec<Option<Tape>>,
}

impl ExprField {
    pub fn new(expr: VectorExpr) -> Result<Self> {
        let tapes = expr
            .components
            .iter()
            .map(|c| Tape::compile(c, &expr.params))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let jac = expr
            .jacobian()
            .into_iter()
            .flatten()
            .map(|d| match d.as_num() {
                Some(v) if v == 0.0 => Ok(None),
                _ => Tape::compile(&d, &expr.params).map(Some),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(ExprField { expr, tapes, jac })
    }

    pub fn parse<S: AsRef<str>>(sources: &[S], params: &BTreeMap<String, f64>) -> Result<Self> {
        ExprField::new(VectorExpr::parse(sources, params.clone())?)
    }
}

impl fmt::Debug for ExprField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let comps: Vec<String> = self.expr.components.iter().map(|c| c.to_string()).collect();
        f.debug_struct("ExprField").field("components", &comps).finish()
    }
}

impl VectorField for ExprField {
    fn dim(&self) -> usize {
        self.tapes.len()
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError> {
        for (o, tape) in out.iter_mut().zip(&self.tapes) {
            *o = tape.eval(t, x)?;
        }
        Ok(())
    }

    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError> {
        for (o, entry) in out.iter_mut().zip(&self.jac) {
            *o = match entry {
                Some(tape) => tape.eval(t, x)?,
                None => 0.0,
            };
        }
        Ok(())
    }

    fn jacobian_source(&self) -> JacobianSource {
        JacobianSource::Exact
    }

    fn expressions(&self) -> Option<&VectorExpr> {
        Some(&self.expr)
    }
}

type FieldFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Opaque callable field; the Jacobian falls back to central differences.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    f: Arc<FieldFn>,
}

impl FnField {
    pub fn new(dim: usize, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        FnField {
            dim,
            f: Arc::new(f),
        }
    }
}

impl VectorField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError> {
        (self.f)(t, x, out);
        Ok(())
    }

    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError> {
        let k = self.dim;
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; k];
        let mut fm = vec![0.0; k];
        for j in 0..k {
            let h = 1e-6 * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            (self.f)(t, &xp, &mut fp);
            xp[j] = x[j] - h;
            (self.f)(t, &xp, &mut fm);
            xp[j] = x[j];
            for i in 0..k {
                out[i * k + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(())
    }

    fn jacobian_source(&self) -> JacobianSource {
        JacobianSource::FiniteDifference
    }
}

/// The pair `(phi, psi)` of `x' = eps*phi(t,x) + psi(t,x)`, both `T`-periodic in `t`.
#[derive(Clone)]
pub struct SystemDef {
    pub name: String,
    pub period: f64,
    pub phi: Arc<dyn VectorField>,
    pub psi: Arc<dyn VectorField>,
    pub params: BTreeMap<String, f64>,
    /// Free-form notes shown by `describe` (coordinate conventions etc.).
    pub notes: Vec<String>,
}

impl fmt::Debug for SystemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDef")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("period", &self.period)
            .field("params", &self.params)
            .finish()
    }
}

impl SystemDef {
    pub fn new(
        name: impl Into<String>,
        period: f64,
        phi: Arc<dyn VectorField>,
        psi: Arc<dyn VectorField>,
    ) -> Result<Self> {
        if phi.dim() != psi.dim() {
            return Err(Error::Dimension {
                expected: psi.dim(),
                got: phi.dim(),
            });
        }
        if phi.dim() == 0 {
            return Err(Error::Invalid("phase dimension must be positive".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Invalid(format!("period must be positive, got {period}")));
        }
        Ok(SystemDef {
            name: name.into(),
            period,
            phi,
            psi,
            params: BTreeMap::new(),
            notes: Vec::new(),
        })
    }

    /// Builds a system from component expression strings.
    pub fn from_sources<S: AsRef<str>>(
        name: impl Into<String>,
        period: f64,
        phi: &[S],
        psi: &[S],
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let phi = ExprField::parse(phi, &params)?;
        let psi = ExprField::parse(psi, &params)?;
        let mut sys = SystemDef::new(name, period, Arc::new(phi), Arc::new(psi))?;
        sys.params = params;
        Ok(sys)
    }

    /// Same `psi`, period and name with a different perturbation.
    pub fn with_phi(&self, phi: Arc<dyn VectorField>) -> Result<Self> {
        let mut sys = SystemDef::new(self.name.clone(), self.period, phi, self.psi.clone())?;
        sys.params = self.params.clone();
        sys.notes = self.notes.clone();
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.psi.dim()
    }

    pub fn phi_at(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.phi.eval(t, x, &mut out)?;
        Ok(out)
    }

    pub fn psi_at(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.psi.eval(t, x, &mut out)?;
        Ok(out)
    }

    pub fn psi_jac(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let k = self.dim();
        let mut buf = vec![0.0; k * k];
        self.psi.jacobian(t, x, &mut buf)?;
        Ok(DMatrix::from_row_slice(k, k, &buf))
    }

    pub fn phi_jac(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let k = self.dim();
        let mut buf = vec![0.0; k * k];
        self.phi.jacobian(t, x, &mut buf)?;
        Ok(DMatrix::from_row_slice(k, k, &buf))
    }

    /// Trace of [`SystemDef::psi_jac`], summed over the same evaluations.
    pub fn psi_div(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.psi_jac(t, x)?.trace())
    }

    pub fn jacobian_sources(&self) -> (JacobianSource, JacobianSource) {
        (self.phi.jacobian_source(), self.psi.jacobian_source())
    }

    /// Right-hand side `eps*phi + psi` as an integrator closure.
    pub fn full_rhs(&self, eps: f64) -> impl Fn(f64, &[f64], &mut [f64]) -> Result<()> + '_ {
        let k = self.dim();
        move |t, x, out| {
            self.psi.eval(t, x, out)?;
            if eps != 0.0 {
                let mut p = vec![0.0; k];
                self.phi.eval(t, x, &mut p)?;
                for (o, v) in out.iter_mut().zip(p) {
                    *o += eps * v;
                }
            }
            Ok(())
        }
    }

    /// Right-hand side of the unperturbed system `x' = psi(t, x)`.
    pub fn psi_rhs(&self) -> impl Fn(f64, &[f64], &mut [f64]) -> Result<()> + '_ {
        move |t, x, out| Ok(self.psi.eval(t, x, out)?)
    }
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::registry;

    #[test]
    fn jacobians_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sys in registry::builtin_registry() {
            let k = sys.dim();
            let fd = FnField::new(k, {
                let psi = sys.psi.clone();
                move |t, x, out| psi.eval(t, x, out).unwrap()
            });
            for _ in 0..20 {
                let t = rng.random_range(0.0..sys.period);
                let x: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
                let exact = sys.psi_jac(t, &x).unwrap();
                let mut approx = vec![0.0; k * k];
                fd.jacobian(t, &x, &mut approx).unwrap();
                for (a, b) in exact.transpose().iter().zip(&approx) {
                    assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{}: {a} vs {b}", sys.name);
                }
                let tr: f64 = (0..k).map(|i| exact[(i, i)]).sum();
                assert_eq!(sys.psi_div(t, &x).unwrap(), tr);
            }
        }
    }

    #[test]
    fn builtin_fields_are_periodic_in_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for sys in registry::builtin_registry() {
            for _ in 0..10 {
                let t = rng.random_range(0.0..sys.period);
                let x: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
                let a = sys.phi_at(t, &x).unwrap();
                let b = sys.phi_at(t + sys.period, &x).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-12);
                }
                let a = sys.psi_at(t, &x).unwrap();
                let b = sys.psi_at(t + sys.period, &x).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let phi = ExprField::parse(&["1"], &BTreeMap::new()).unwrap();
        let psi = ExprField::parse(&["x2", "x1"], &BTreeMap::new()).unwrap();
        assert!(SystemDef::new("bad", 1.0, Arc::new(phi), Arc::new(psi)).is_err());
    }

    #[test]
    fn opaque_fields_are_flagged() {
        let f = FnField::new(1, |_, x, out| out[0] = x[0].sin());
        assert_eq!(f.jacobian_source(), JacobianSource::FiniteDifference);
        let mut j = [0.0];
        f.jacobian(0.0, &[0.3], &mut j).unwrap();
        assert!((j[0] - 0.3f64.cos()).abs() < 1e-9);
    }
}
