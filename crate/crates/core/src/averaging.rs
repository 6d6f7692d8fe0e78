//! Averaged field `Phi(xi) = -lim eta(-nT,0,xi)/(nT)`, the averaged system
//! `z' = Phi(z)`, comparison of the full solution with
//! `Omega(t, 0, z(eps t))` on `[0, d/eps]`, and the classical standard form.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{integrate, integrate_endpoint, IntegratorConfig, SystemDef, Trajectory};
use crate::variational::{coupled_rhs, flow_jacobian};

/// Seed of the validation sample set.
pub const VALIDATION_SEED: u64 = 0x5eed_a7e5;
pub const VALIDATION_SAMPLES: usize = 17;

/// Origin plus `n - 1` seeded points uniform in the closed ball `B(0, r)`.
pub fn ball_samples(dim: usize, r: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![0.0; dim]];
    while out.len() < n {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len > 1.0 || len == 0.0 {
            continue;
        }
        let scale = r * rng.random::<f64>().powf(1.0 / dim as f64) / len;
        out.push(v.iter().map(|c| c * scale).collect());
    }
    out
}

type PhiFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
enum Source {
    Limit { sys: SystemDef, cfg: IntegratorConfig },
    Explicit(PhiFn),
}

/// Evaluator of `Phi` with the convergence data that justified it.
#[derive(Clone)]
pub struct AveragedField {
    source: Source,
    dim: usize,
    pub n_used: usize,
    pub radius: f64,
    pub samples: Vec<Vec<f64>>,
    /// `max_i |Phi_n - Phi_2n|` over the samples for `n = 1, 2, 4, ...`.
    pub trend: Vec<f64>,
    pub label: String,
}

impl std::fmt::Debug for AveragedField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AveragedField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("n_used", &self.n_used)
            .field("radius", &self.radius)
            .field("trend", &self.trend)
            .finish()
    }
}

/// `eta(-m T, 0, xi)` for each requested multiple, from one backward run
/// continued segment by segment. `multiples` must be increasing.
pub fn eta_backward(sys: &SystemDef, xi: &[f64], multiples: &[usize], cfg: &IntegratorConfig) -> Result<Vec<Vec<f64>>> {
    let k = sys.dim();
    let rhs = coupled_rhs(sys);
    let mut z = xi.to_vec();
    z.extend(std::iter::repeat_n(0.0, k));
    let mut at = 0usize;
    let mut out = Vec::with_capacity(multiples.len());
    for &m in multiples {
        if m < at {
            return Err(Error::Invalid("multiples must be increasing".into()));
        }
        if m > at {
            z = integrate_endpoint(&rhs, -(at as f64) * sys.period, -(m as f64) * sys.period, &z, cfg)?;
            at = m;
        }
        out.push(z[k..].to_vec());
    }
    Ok(out)
}

fn phi_n(eta: &[f64], n: usize, period: f64) -> Vec<f64> {
    eta.iter().map(|v| -v / (n as f64 * period)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Builds `Phi` by doubling `n` until `|Phi_n - Phi_2n| <= phi_tol` at the
/// 17 validation samples of `B(0, r)`.
pub fn averaged_field(sys: &SystemDef, r: f64, n_max: usize, phi_tol: f64, cfg: &IntegratorConfig) -> Result<AveragedField> {
    if !(r > 0.0) {
        return Err(Error::Invalid(format!("radius must be positive, got {r}")));
    }
    let samples = ball_samples(sys.dim(), r, VALIDATION_SAMPLES, VALIDATION_SEED);
    // one backward run per sample, continued as n doubles
    let mut trend = Vec::new();
    let mut states: Vec<(Vec<f64>, usize)> = samples
        .iter()
        .map(|xi| {
            let mut z = xi.clone();
            z.extend(std::iter::repeat_n(0.0, sys.dim()));
            (z, 0usize)
        })
        .collect();
    let k = sys.dim();
    let advance = |st: &mut (Vec<f64>, usize), m: usize| -> Result<Vec<f64>> {
        if m > st.1 {
            let rhs = coupled_rhs(sys);
            st.0 = integrate_endpoint(&rhs, -(st.1 as f64) * sys.period, -(m as f64) * sys.period, &st.0, cfg)?;
            st.1 = m;
        }
        Ok(st.0[k..].to_vec())
    };
    let mut prev: Vec<Vec<f64>> = states
        .par_iter_mut()
        .map(|st| advance(st, 1).map(|e| phi_n(&e, 1, sys.period)))
        .collect::<Result<_>>()?;
    let mut n = 1usize;
    loop {
        let next: Vec<Vec<f64>> = states
            .par_iter_mut()
            .map(|st| advance(st, 2 * n).map(|e| phi_n(&e, 2 * n, sys.period)))
            .collect::<Result<_>>()?;
        let est = prev.iter().zip(&next).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
        trend.push(est);
        if est <= phi_tol {
            break;
        }
        if 2 * n > n_max {
            return Err(Error::AveragingNoConvergence { n, estimate: est, trend });
        }
        prev = next;
        n *= 2;
    }
    Ok(AveragedField {
        source: Source::Limit { sys: sys.clone(), cfg: *cfg },
        dim: sys.dim(),
        n_used: n,
        radius: r,
        samples,
        trend,
        label: format!("limit of -eta(-nT,0,.)/(nT), n = {n}"),
    })
}

impl AveragedField {
    /// `Phi` given in closed form, e.g. where the limit is known analytically.
    pub fn explicit(dim: usize, radius: f64, label: impl Into<String>, f: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static) -> Self {
        AveragedField {
            source: Source::Explicit(Arc::new(f)),
            dim,
            n_used: 0,
            radius,
            samples: Vec::new(),
            trend: Vec::new(),
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: xi.len(),
            });
        }
        match &self.source {
            Source::Explicit(f) => f(xi),
            Source::Limit { sys, cfg } => {
                let eta = eta_backward(sys, xi, &[self.n_used], cfg)?;
                Ok(phi_n(&eta[0], self.n_used, sys.period))
            }
        }
    }

    /// Central-difference Jacobian, step `1e-6 (1 + |x_j|)`.
    pub fn jacobian(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        let k = self.dim;
        let mut m = DMatrix::zeros(k, k);
        for j in 0..k {
            let h = 1e-6 * (1.0 + xi[j].abs());
            let mut p = xi.to_vec();
            let mut q = xi.to_vec();
            p[j] += h;
            q[j] -= h;
            let (fp, fq) = (self.eval(&p)?, self.eval(&q)?);
            for i in 0..k {
                m[(i, j)] = (fp[i] - fq[i]) / (2.0 * h);
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct AveragedSolution {
    pub trajectory: Trajectory,
    /// Largest spectral norm of the finite-difference Jacobian of `Phi`
    /// along the solution: evidence of uniqueness, not a certificate.
    pub lipschitz: f64,
}

/// Solves `z' = Phi(z)`, `z(0) = xi0` on `[0, d]` and checks that `z`
/// stays in the validated ball.
pub fn solve_averaged(field: &AveragedField, xi0: &[f64], d: f64, cfg: &IntegratorConfig) -> Result<AveragedSolution> {
    let traj = integrate(
        |_, z: &[f64], out: &mut [f64]| {
            out.copy_from_slice(&field.eval(z)?);
            Ok(())
        },
        0.0,
        d,
        xi0,
        cfg,
    )?;
    for (t, z) in traj.nodes() {
        let n = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > field.radius {
            return Err(Error::LeftBall {
                t,
                norm: n,
                radius: field.radius,
            });
        }
    }
    let probes = 9;
    let mut lipschitz: f64 = 0.0;
    for i in 0..probes {
        let t = d * i as f64 / (probes - 1) as f64;
        let j = field.jacobian(&traj.eval(t)?)?;
        let sv = j.singular_values();
        lipschitz = lipschitz.max(sv.iter().copied().fold(0.0, f64::max));
    }
    Ok(AveragedSolution {
        trajectory: traj,
        lipschitz,
    })
}

pub const THEOREM4_GRID: usize = 1024;

/// Comparison of the full solution with the averaged approximation.
#[derive(Debug, Clone)]
pub struct CauchyVerdict {
    pub eps: f64,
    pub xi0: Vec<f64>,
    pub d: f64,
    pub sup_error: f64,
    pub gamma_tol: f64,
    pub pass: bool,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub approx: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
}

/// For each `eps`: integrates the full system from `xi0` over `[0, d/eps]`
/// and measures `sup |x_eps(t) - Omega(t, 0, z(eps t))|` on a 1024-point grid.
///
/// `Omega(t, 0, z(eps t))` is evaluated by a fresh flow run from time 0 for
/// each grid point; when `z` is constant a single dense run is shared.
pub fn verify_theorem4(
    sys: &SystemDef,
    field: &AveragedField,
    xi0: &[f64],
    d: f64,
    eps_list: &[f64],
    gamma_tol: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<CauchyVerdict>> {
    if let Some(e) = eps_list.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Invalid(format!("eps must be positive, got {e}")));
    }
    let z = solve_averaged(field, xi0, d, cfg)?;
    eps_list
        .iter()
        .map(|&eps| {
            let horizon = d / eps;
            let x = integrate(sys.full_rhs(eps), 0.0, horizon, xi0, cfg)?;
            let times: Vec<f64> = (0..THEOREM4_GRID)
                .map(|i| {
                    if i == THEOREM4_GRID - 1 {
                        horizon
                    } else {
                        horizon * i as f64 / (THEOREM4_GRID - 1) as f64
                    }
                })
                .collect();
            let zs: Vec<Vec<f64>> = times.iter().map(|t| z.trajectory.eval((eps * t).min(d))).collect::<Result<_>>()?;
            let constant = zs.windows(2).all(|w| w[0] == w[1]);
            let approx: Vec<Vec<f64>> = if constant {
                let omega = integrate(sys.psi_rhs(), 0.0, horizon, &zs[0], cfg)?;
                times.iter().map(|t| omega.eval(*t)).collect::<Result<_>>()?
            } else {
                times
                    .par_iter()
                    .zip(&zs)
                    .map(|(t, z0)| integrate_endpoint(sys.psi_rhs(), 0.0, *t, z0, cfg))
                    .collect::<Result<_>>()?
            };
            let xs: Vec<Vec<f64>> = times.iter().map(|t| x.eval(*t)).collect::<Result<_>>()?;
            let errors: Vec<f64> = xs.iter().zip(&approx).map(|(a, b)| dist(a, b)).collect();
            let sup_error = errors.iter().copied().fold(0.0, f64::max);
            Ok(CauchyVerdict {
                eps,
                xi0: xi0.to_vec(),
                d,
                sup_error,
                gamma_tol,
                pass: sup_error <= gamma_tol,
                times,
                x: xs,
                approx,
                errors,
            })
        })
        .collect()
}

/// Standard-form right-hand side `f(t, z) = [D_xi Omega(t,0,z)]^{-1} phi(t, Omega(t,0,z))`
/// induced by `z = Omega(0, t, x)`.
pub struct StandardForm<'a> {
    sys: &'a SystemDef,
    cfg: IntegratorConfig,
    /// Threshold for the periodicity warning `|Omega(T,0,z) - z|`.
    pub periodic_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormValue {
    pub f: Vec<f64>,
    /// `Omega(T, 0, z) != z`: the change of variable is not `T`-periodic at `z`.
    pub not_periodic: bool,
    pub period_residual: f64,
}

pub fn to_standard_form<'a>(sys: &'a SystemDef, cfg: &IntegratorConfig) -> StandardForm<'a> {
    StandardForm {
        sys,
        cfg: *cfg,
        periodic_tol: 1e-7,
    }
}

impl StandardForm<'_> {
    pub fn eval(&self, t: f64, z: &[f64]) -> Result<StandardFormValue> {
        let (x, y) = flow_jacobian(self.sys, 0.0, 0.0, t, z, &self.cfg)?;
        let sv = y.singular_values();
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().copied().fold(0.0, f64::max);
        if !(smin > 1e-12 * smax.max(1.0)) {
            return Err(Error::SingularJacobian { sigma_min: smin });
        }
        let phi = DVector::from_vec(self.sys.phi_at(t, &x)?);
        let f = y.lu().solve(&phi).ok_or(Error::SingularJacobian { sigma_min: smin })?;
        let xt = integrate_endpoint(self.sys.psi_rhs(), 0.0, self.sys.period, z, &self.cfg)?;
        let period_residual = dist(&xt, z);
        Ok(StandardFormValue {
            f: f.iter().copied().collect(),
            not_periodic: period_residual > self.periodic_tol * (1.0 + z.iter().map(|c| c * c).sum::<f64>().sqrt()),
            period_residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::f64::consts::TAU;

    use super::*;
    use crate::flow::GaussLegendre;
    use crate::registry;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn samples_are_seeded_and_in_ball() {
        let a = ball_samples(2, 1.5, 17, 7);
        assert_eq!(a, ball_samples(2, 1.5, 17, 7));
        assert_eq!(a.len(), 17);
        assert!(a.iter().all(|p| dist(p, &[0.0, 0.0]) <= 1.5));
    }

    #[test]
    fn scalar_average_is_minus_identity() {
        let sys = registry::e3_scalar();
        let f = averaged_field(&sys, 2.0, 64, 1e-7, &cfg()).unwrap();
        assert_eq!(f.n_used, 1);
        for xi in [-1.5, 0.0, 0.3, 1.9] {
            assert!((f.eval(&[xi]).unwrap()[0] + xi).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_eta_without_psi() {
        let sys = SystemDef::from_sources("q", TAU, &["cos(t)^2 - x1", "sin(2*t) + x1*x2"], &["0", "0"], BTreeMap::new()).unwrap();
        let xi = [0.4, -0.7];
        let eta = eta_backward(&sys, &xi, &[1, 3], &cfg()).unwrap();
        for (m, e) in [1usize, 3].iter().zip(&eta) {
            let gl = GaussLegendre::default();
            let mut int = [0.0; 2];
            for (t, w) in gl.composite(-(*m as f64) * TAU, 0.0, 64 * m) {
                let v = sys.phi_at(t, &xi).unwrap();
                int[0] += w * v[0];
                int[1] += w * v[1];
            }
            assert!((e[0] + int[0]).abs() < 1e-9 && (e[1] + int[1]).abs() < 1e-9, "{e:?} {int:?}");
        }
    }

    #[test]
    fn zero_perturbation_zero_field() {
        let sys = SystemDef::from_sources("z", TAU, &["0", "0"], &["-x2", "x1"], BTreeMap::new()).unwrap();
        let f = averaged_field(&sys, 1.0, 8, 1e-7, &cfg()).unwrap();
        assert_eq!(f.eval(&[0.3, 0.2]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn non_convergence_reports_trend() {
        // eta grows like t^2 backwards: Phi_n diverges linearly in n
        let sys = SystemDef::from_sources("d", TAU, &["t"], &["0"], BTreeMap::new()).unwrap();
        match averaged_field(&sys, 1.0, 4, 1e-7, &cfg()) {
            Err(Error::AveragingNoConvergence { trend, .. }) => assert!(trend.len() >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn explicit_field_solution() {
        let f = AveragedField::explicit(1, 10.0, "-z", |z| Ok(vec![-z[0]]));
        let sol = solve_averaged(&f, &[1.0], 1.0, &cfg()).unwrap();
        assert!((sol.trajectory.endpoint()[0] - (-1f64).exp()).abs() < 1e-9);
        assert!((sol.lipschitz - 1.0).abs() < 1e-6);
        let zero = AveragedField::explicit(2, 10.0, "0", |_| Ok(vec![0.0, 0.0]));
        assert_eq!(solve_averaged(&zero, &[0.3, 0.1], 2.0, &cfg()).unwrap().trajectory.endpoint(), &[0.3, 0.1]);
        let grow = AveragedField::explicit(1, 2.0, "z", |z| Ok(vec![z[0]]));
        assert!(matches!(solve_averaged(&grow, &[1.0], 1.0, &cfg()), Err(Error::LeftBall { .. })));
    }

    #[test]
    fn van_der_pol_amplitude_equilibrium() {
        // amplitude equation a' = a/2 (1 - a^2/4) from the averaged van der Pol field
        let sys = SystemDef::from_sources("a", TAU, &["x1/2*(1 - x1^2/4) + 0*cos(t)"], &["0"], BTreeMap::new()).unwrap();
        let f = averaged_field(&sys, 4.0, 8, 1e-7, &cfg()).unwrap();
        let (mut lo, mut hi) = (1.0, 3.0);
        for _ in 0..60 {
            let mid: f64 = 0.5 * (lo + hi);
            if f.eval(&[mid]).unwrap()[0] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 2.0).abs() < 1e-8);
    }

    #[test]
    fn theorem4_trivial_and_rate() {
        let zero = SystemDef::from_sources("z", TAU, &["0"], &["0"], BTreeMap::new()).unwrap();
        let f = averaged_field(&zero, 2.0, 4, 1e-7, &cfg()).unwrap();
        let v = verify_theorem4(&zero, &f, &[0.5], 1.0, &[0.1], 1e-3, &cfg()).unwrap();
        assert_eq!(v[0].sup_error, 0.0);
        let e3 = registry::e3_scalar();
        let f = averaged_field(&e3, 2.0, 8, 1e-7, &cfg()).unwrap();
        let v = verify_theorem4(&e3, &f, &[1.0], 1.0, &[0.02, 0.01], 0.1, &cfg()).unwrap();
        let ratio = v[0].sup_error / v[1].sup_error;
        assert!((1.6..=2.4).contains(&ratio), "{ratio}");
        assert!(v.iter().all(|c| c.pass));
    }

    #[test]
    fn standard_form_cases() {
        let triv = SystemDef::from_sources("p", TAU, &["x2 + cos(t)", "-x1"], &["0", "0"], BTreeMap::new()).unwrap();
        let sf = to_standard_form(&triv, &cfg());
        let v = sf.eval(1.3, &[0.2, 0.5]).unwrap();
        assert!((v.f[0] - (0.5 + 1.3f64.cos())).abs() < 1e-12 && (v.f[1] + 0.2).abs() < 1e-12);
        assert!(!v.not_periodic);

        let rot = SystemDef::from_sources("r", TAU, &["x1*x2", "cos(t) - x1"], &["-x2", "x1"], BTreeMap::new()).unwrap();
        let sf = to_standard_form(&rot, &cfg());
        let (t, z) = (0.9f64, [0.3, -0.4]);
        let (c, s) = (t.cos(), t.sin());
        let x = [c * z[0] - s * z[1], s * z[0] + c * z[1]];
        let p = [x[0] * x[1], t.cos() - x[0]];
        let expect = [c * p[0] + s * p[1], -s * p[0] + c * p[1]];
        let v = sf.eval(t, &z).unwrap();
        for i in 0..2 {
            assert!(((v.f[i] - expect[i]) / expect[i]).abs() < 1e-8);
        }

        let e1 = registry::e1_circle();
        let sf = to_standard_form(&e1, &cfg());
        assert!(!sf.eval(0.5, &[1.0, 0.0]).unwrap().not_periodic);
        assert!(sf.eval(0.5, &[0.5, 0.0]).unwrap().not_periodic);
    }
}
