//! The auxiliary affine system
//! `y' = phi(t, Omega(t,0,xi)) + psi'(t, Omega(t,0,xi)) y`, its solution
//! `eta(t, s, xi)` with `eta(s) = 0`, the period defect
//! `xi -> eta(T,s,xi) - eta(0,s,xi)`, monodromy matrices and Floquet
//! multipliers.
//!
//! `Omega` and `y` are always integrated together as one `2k`-dimensional
//! system so the coefficients are evaluated on the same step sequence.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{
    flow_omega, flow_trajectory, integrate, integrate_endpoint, GaussLegendre, IntegratorConfig,
    SystemDef, Trajectory, PANELS_PER_PERIOD,
};

/// Right-hand side of the coupled `(x, y)` system.
pub(crate) fn coupled_rhs(sys: &SystemDef) -> impl Fn(f64, &[f64], &mut [f64]) -> Result<()> + '_ {
    let k = sys.dim();
    move |t, z, out| {
        let (x, y) = z.split_at(k);
        let (dx, dy) = out.split_at_mut(k);
        sys.psi.eval(t, x, dx)?;
        sys.phi.eval(t, x, dy)?;
        let mut jac = [0.0; 16];
        let mut heap;
        let jac: &mut [f64] = if k * k <= 16 {
            &mut jac[..k * k]
        } else {
            heap = vec![0.0; k * k];
            &mut heap
        };
        sys.psi.jacobian(t, x, jac)?;
        for i in 0..k {
            let row = &jac[i * k..(i + 1) * k];
            dy[i] += row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(())
    }
}

fn check_anchor(sys: &SystemDef, s: f64) -> Result<()> {
    if !(0.0..=sys.period).contains(&s) {
        return Err(Error::Invalid(format!(
            "anchor s = {s} outside [0, {}]",
            sys.period
        )));
    }
    Ok(())
}

/// `eta(., s, xi)` sampled at requested times, with the coupled trajectories
/// that produced the samples.
#[derive(Debug, Clone)]
pub struct EtaSolution {
    pub xi: Vec<f64>,
    pub s: f64,
    /// `(t, eta(t, s, xi))` in the order of the requested times.
    pub values: Vec<(f64, Vec<f64>)>,
    /// Coupled `(Omega, y)` trajectory from `s` forward, if any time exceeds `s`.
    pub forward: Option<Trajectory>,
    /// Coupled trajectory from `s` backward, if any time precedes `s`.
    pub backward: Option<Trajectory>,
}

impl EtaSolution {
    /// `eta(t, s, xi)` anywhere on the integrated range.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.coupled_at(t)?.split_off(self.xi.len()))
    }

    /// `Omega(t, 0, xi)` from the coupled run.
    pub fn omega_at(&self, t: f64) -> Result<Vec<f64>> {
        let mut z = self.coupled_at(t)?;
        z.truncate(self.xi.len());
        Ok(z)
    }

    fn coupled_at(&self, t: f64) -> Result<Vec<f64>> {
        let tr = if t >= self.s {
            self.forward.as_ref()
        } else {
            self.backward.as_ref()
        };
        match tr {
            Some(tr) => tr.eval(t),
            None if t == self.s => {
                let first = self.forward.as_ref().or(self.backward.as_ref());
                match first {
                    Some(tr) => tr.eval(t),
                    None => Err(Error::OutOfRange { t, lo: t, hi: t }),
                }
            }
            None => Err(Error::OutOfRange {
                t,
                lo: self.s,
                hi: self.s,
            }),
        }
    }
}

/// Solves the auxiliary system from `y(s) = 0` and samples it at
/// `eval_times`, which may lie on either side of `s` (including negative
/// times). `eta(s, s, xi)` is returned as exact zeros.
pub fn eta(
    sys: &SystemDef,
    s: f64,
    xi: &[f64],
    eval_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<EtaSolution> {
    check_anchor(sys, s)?;
    let k = sys.dim();
    if xi.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: xi.len(),
        });
    }
    let x_s = flow_omega(sys, s, 0.0, xi, cfg)?;
    let mut z0 = x_s;
    z0.extend(std::iter::repeat_n(0.0, k));
    let t_max = eval_times.iter().copied().fold(s, f64::max);
    let t_min = eval_times.iter().copied().fold(s, f64::min);
    let rhs = coupled_rhs(sys);
    let forward = (t_max > s)
        .then(|| integrate(&rhs, s, t_max, &z0, cfg))
        .transpose()?;
    let backward = (t_min < s)
        .then(|| integrate(&rhs, s, t_min, &z0, cfg))
        .transpose()?;
    let mut sol = EtaSolution {
        xi: xi.to_vec(),
        s,
        values: Vec::with_capacity(eval_times.len()),
        forward,
        backward,
    };
    for &t in eval_times {
        let v = if t == s { vec![0.0; k] } else { sol.at(t)? };
        sol.values.push((t, v));
    }
    Ok(sol)
}

/// `eta(T, s, xi) - eta(0, s, xi)` by direct coupled runs from `s`.
pub fn eta_defect(sys: &SystemDef, s: f64, xi: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let x_s = flow_omega(sys, s, 0.0, xi, cfg)?;
    defect_from_anchor(sys, s, &x_s, cfg)
}

pub(crate) fn defect_from_anchor(sys: &SystemDef, s: f64, x_s: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let k = sys.dim();
    let mut z0 = x_s.to_vec();
    z0.extend(std::iter::repeat_n(0.0, k));
    let rhs = coupled_rhs(sys);
    let end = if s < sys.period {
        integrate_endpoint(&rhs, s, sys.period, &z0, cfg)?.split_off(k)
    } else {
        vec![0.0; k]
    };
    let start = if s > 0.0 {
        integrate_endpoint(&rhs, s, 0.0, &z0, cfg)?.split_off(k)
    } else {
        vec![0.0; k]
    };
    Ok(end.iter().zip(&start).map(|(a, b)| a - b).collect())
}

/// Period defects `eta(T,s,xi) - eta(0,s,xi)` for every anchor `s` from one
/// run of `(Omega, Y, eta(., 0, xi))` on `[0, T]`, where `Y` is the
/// fundamental matrix of `y' = psi'(t, Omega) y`. Since `eta(., s)` and
/// `eta(., 0)` differ by a homogeneous solution,
/// `defect(s) = eta(T,0) + (I - Y(T)) Y(s)^{-1} eta(s,0)`.
#[derive(Debug, Clone)]
pub struct DefectFamily {
    dim: usize,
    run: Trajectory,
    eta_t: Vec<f64>,
    i_minus_y: DMatrix<f64>,
}

impl DefectFamily {
    pub fn new(sys: &SystemDef, xi: &[f64], cfg: &IntegratorConfig) -> Result<Self> {
        let k = sys.dim();
        if xi.len() != k {
            return Err(Error::Dimension { expected: k, got: xi.len() });
        }
        let mut init = xi.to_vec();
        for i in 0..k {
            for j in 0..k {
                init.push(if i == j { 1.0 } else { 0.0 });
            }
        }
        init.extend(std::iter::repeat_n(0.0, k));
        let mut jac = vec![0.0; k * k];
        let run = integrate(
            |t, z: &[f64], out: &mut [f64]| {
                let (x, rest) = z.split_at(k);
                let (y, e) = rest.split_at(k * k);
                let (dx, drest) = out.split_at_mut(k);
                let (dy, de) = drest.split_at_mut(k * k);
                sys.psi.eval(t, x, dx)?;
                sys.phi.eval(t, x, de)?;
                sys.psi.jacobian(t, x, &mut jac)?;
                for i in 0..k {
                    let row = &jac[i * k..(i + 1) * k];
                    de[i] += row.iter().zip(e).map(|(a, b)| a * b).sum::<f64>();
                    for j in 0..k {
                        dy[i * k + j] = (0..k).map(|m| row[m] * y[m * k + j]).sum();
                    }
                }
                Ok(())
            },
            0.0,
            sys.period,
            &init,
            cfg,
        )?;
        let end = run.endpoint();
        let y_t = DMatrix::from_row_slice(k, k, &end[k..k + k * k]);
        Ok(DefectFamily {
            dim: k,
            eta_t: end[k + k * k..].to_vec(),
            i_minus_y: DMatrix::identity(k, k) - y_t,
            run,
        })
    }

    pub fn at(&self, s: f64) -> Result<Vec<f64>> {
        let k = self.dim;
        let z = self.run.eval(s)?;
        let y_s = DMatrix::from_row_slice(k, k, &z[k..k + k * k]);
        let e_s = nalgebra::DVector::from_column_slice(&z[k + k * k..]);
        let w = y_s
            .lu()
            .solve(&e_s)
            .ok_or_else(|| Error::Invalid(format!("singular fundamental matrix at s = {s}")))?;
        let d = &self.i_minus_y * w;
        Ok(self.eta_t.iter().zip(d.iter()).map(|(a, b)| a + b).collect())
    }
}

/// State and fundamental matrix of `x' = eps*phi(t,x) + psi(t,x)` from
/// `(t0, xi)` to `t1`: returns `x(t1)` and `d x(t1) / d xi`.
pub fn flow_jacobian(
    sys: &SystemDef,
    eps: f64,
    t0: f64,
    t1: f64,
    xi: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let k = sys.dim();
    let mut init = xi.to_vec();
    for i in 0..k {
        for j in 0..k {
            init.push(if i == j { 1.0 } else { 0.0 });
        }
    }
    let mut psi_j = vec![0.0; k * k];
    let mut phi_j = vec![0.0; k * k];
    let mut phi_v = vec![0.0; k];
    let end = integrate_endpoint(
        |t, s: &[f64], out: &mut [f64]| {
            let (x, y) = s.split_at(k);
            let (dx, dy) = out.split_at_mut(k);
            let a = &mut psi_j;
            sys.psi.eval(t, x, dx)?;
            sys.psi.jacobian(t, x, a)?;
            if eps != 0.0 {
                sys.phi.eval(t, x, &mut phi_v)?;
                sys.phi.jacobian(t, x, &mut phi_j)?;
                for i in 0..k {
                    dx[i] += eps * phi_v[i];
                }
                for (ai, bi) in a.iter_mut().zip(&phi_j) {
                    *ai += eps * bi;
                }
            }
            for i in 0..k {
                for j in 0..k {
                    dy[i * k + j] = (0..k).map(|m| a[i * k + m] * y[m * k + j]).sum();
                }
            }
            Ok(())
        },
        t0,
        t1,
        &init,
        cfg,
    )?;
    Ok((end[..k].to_vec(), DMatrix::from_row_slice(k, k, &end[k..])))
}

/// Reusable evaluator of `xi -> eta(T,s,xi) - eta(0,s,xi)` for a fixed
/// anchor `s`. The `Omega` trajectory on `[0, T]` is cached per `xi`.
pub struct EtaDefectField<'a> {
    sys: &'a SystemDef,
    s: f64,
    cfg: IntegratorConfig,
    cache: Mutex<HashMap<Vec<u64>, Arc<Trajectory>>>,
}

impl<'a> EtaDefectField<'a> {
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn eval(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.sys.dim() {
            return Err(Error::Dimension {
                expected: self.sys.dim(),
                got: xi.len(),
            });
        }
        let x_s = if self.s == 0.0 {
            xi.to_vec()
        } else {
            self.omega(xi)?.eval(self.s)?
        };
        defect_from_anchor(self.sys, self.s, &x_s, &self.cfg)
    }

    /// Cached `Omega(., 0, xi)` on `[0, T]`.
    pub fn omega(&self, xi: &[f64]) -> Result<Arc<Trajectory>> {
        let key: Vec<u64> = xi.iter().map(|v| v.to_bits()).collect();
        if let Some(tr) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(tr.clone());
        }
        let tr = Arc::new(flow_trajectory(self.sys, 0.0, self.sys.period, xi, &self.cfg)?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, tr.clone());
        Ok(tr)
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

pub fn eta_defect_field<'a>(
    sys: &'a SystemDef,
    s: f64,
    cfg: &IntegratorConfig,
) -> Result<EtaDefectField<'a>> {
    check_anchor(sys, s)?;
    Ok(EtaDefectField {
        sys,
        s,
        cfg: *cfg,
        cache: Mutex::new(HashMap::new()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multiplier {
    pub value: Complex<f64>,
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
pub struct MonodromyReport {
    pub matrix: DMatrix<f64>,
    /// Distinct multipliers (clustered within `1e-9`), sorted by modulus, largest first.
    pub multipliers: Vec<Multiplier>,
    /// All eigenvalues with repetition, same ordering.
    pub eigenvalues: Vec<Complex<f64>>,
    pub trace_integral: f64,
    pub determinant: f64,
}

impl MonodromyReport {
    /// `|det M - exp(int tr)| / exp(int tr)`.
    pub fn liouville_rel_error(&self) -> f64 {
        let expected = self.trace_integral.exp();
        (self.determinant - expected).abs() / expected
    }
}

const CLUSTER_TOL: f64 = 1e-9;

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let mut ev: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen);
    }
    ev.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    Ok(ev)
}

fn cluster(ev: &[Complex<f64>]) -> Vec<Multiplier> {
    let mut out: Vec<Multiplier> = Vec::new();
    for &z in ev {
        match out.iter_mut().find(|m| (m.value - z).norm() <= CLUSTER_TOL) {
            Some(m) => m.multiplicity += 1,
            None => out.push(Multiplier {
                value: z,
                multiplicity: 1,
            }),
        }
    }
    out
}

/// Monodromy of `y' = A(t) y` over one period: column `j` is the solution
/// from the unit vector `e_j` at `t = T`.
pub fn monodromy<A>(linear: A, dim: usize, period: f64, cfg: &IntegratorConfig) -> Result<MonodromyReport>
where
    A: Fn(f64) -> Result<DMatrix<f64>> + Sync,
{
    let columns = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            integrate_endpoint(
                |t, y: &[f64], dy: &mut [f64]| {
                    let a = linear(t)?;
                    for i in 0..dim {
                        dy[i] = (0..dim).map(|c| a[(i, c)] * y[c]).sum();
                    }
                    Ok(())
                },
                0.0,
                period,
                &e,
                cfg,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = DMatrix::from_fn(dim, dim, |i, j| columns[j][i]);
    let gl = GaussLegendre::default();
    let mut trace_integral = 0.0;
    for (t, w) in gl.composite(0.0, period, PANELS_PER_PERIOD) {
        trace_integral += w * linear(t)?.trace();
    }
    let eigenvalues = sorted_eigenvalues(&matrix)?;
    Ok(MonodromyReport {
        multipliers: cluster(&eigenvalues),
        determinant: matrix.determinant(),
        matrix,
        eigenvalues,
        trace_integral,
    })
}

/// Integrates `x' = psi(t, x)` from `xi` over one period and checks that the
/// orbit closes to within `tol`.
pub fn periodic_cycle(sys: &SystemDef, xi: &[f64], tol: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let tr = flow_trajectory(sys, 0.0, sys.period, xi, cfg)?;
    check_cycle(&tr, sys.period, tol)?;
    Ok(tr)
}

pub(crate) fn check_cycle(cycle: &Trajectory, period: f64, tol: f64) -> Result<()> {
    let (lo, hi) = cycle.interval();
    if lo > 0.0 || hi < period {
        return Err(Error::Invalid(format!(
            "cycle must cover [0, {period}], got [{lo}, {hi}]"
        )));
    }
    let a = cycle.eval(0.0)?;
    let b = cycle.eval(period)?;
    let residual = a
        .iter()
        .zip(&b)
        .map(|(u, v)| (u - v).powi(2))
        .sum::<f64>()
        .sqrt();
    if residual > tol {
        return Err(Error::NotPeriodic { residual });
    }
    Ok(())
}

/// `x0(t)` for any real `t`, wrapping into `[0, T]`.
pub fn cycle_at(cycle: &Trajectory, period: f64, t: f64) -> Result<Vec<f64>> {
    let u = t.rem_euclid(period).clamp(0.0, period);
    cycle.eval(u)
}

/// Thresholds for "1 is a simple multiplier".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetConfig {
    /// A multiplier within this distance of 1 counts as 1.
    pub one_tol: f64,
    /// Every other multiplier must stay at least this far from 1.
    pub gap_tol: f64,
    /// Allowed closing residual of the input cycle.
    pub cycle_tol: f64,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        FloquetConfig {
            one_tol: 1e-6,
            gap_tol: 1e-3,
            cycle_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FloquetPhase {
    pub theta: f64,
    pub multipliers: Vec<Complex<f64>>,
    pub closest_to_one: Complex<f64>,
    /// `|mu* - 1|` for the multiplier closest to 1.
    pub distance_to_one: f64,
    /// `min |mu_j - 1|` over the remaining multipliers (infinite when k = 1).
    pub spectral_gap: f64,
    pub has_one: bool,
    pub simple: bool,
    pub liouville_rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct FloquetReport {
    pub phases: Vec<FloquetPhase>,
    /// 1 is an algebraically simple multiplier at every phase.
    pub holds: bool,
}

/// Multipliers of `y' = psi'(t, x0(t + theta)) y` for each phase.
///
/// For an autonomous cycle the multiplier 1 is always present; the
/// verdict is whether it is simple, read off the spectral gap.
pub fn floquet_condition_a3(
    sys: &SystemDef,
    cycle: &Trajectory,
    theta_grid: &[f64],
    cfg: &IntegratorConfig,
    fcfg: &FloquetConfig,
) -> Result<FloquetReport> {
    let period = sys.period;
    check_cycle(cycle, period, fcfg.cycle_tol)?;
    let phases = theta_grid
        .par_iter()
        .map(|&theta| {
            let rep = monodromy(
                |t| sys.psi_jac(t, &cycle_at(cycle, period, t + theta)?),
                sys.dim(),
                period,
                cfg,
            )?;
            let ev = rep.eigenvalues.clone();
            let (best, dist) = ev
                .iter()
                .enumerate()
                .map(|(i, z)| (i, (z - Complex::new(1.0, 0.0)).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty spectrum");
            let gap = ev
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != best)
                .map(|(_, z)| (z - Complex::new(1.0, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            let has_one = dist <= fcfg.one_tol;
            Ok(FloquetPhase {
                theta,
                closest_to_one: ev[best],
                multipliers: ev,
                distance_to_one: dist,
                spectral_gap: gap,
                has_one,
                simple: has_one && gap >= fcfg.gap_tol,
                liouville_rel_error: rep.liouville_rel_error(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let holds = phases.iter().all(|p| p.simple);
    Ok(FloquetReport { phases, holds })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::f64::consts::{E, PI};

    use super::*;
    use crate::registry;

    fn sys(phi: &[&str], psi: &[&str]) -> SystemDef {
        SystemDef::from_sources("test", 2.0 * PI, phi, psi, BTreeMap::new()).unwrap()
    }

    #[test]
    fn zero_perturbation_gives_zero_eta() {
        let s = sys(&["0", "0"], &["-x2 + x1*(1 - x1^2 - x2^2)", "x1 + x2*(1 - x1^2 - x2^2)"]);
        let sol = eta(&s, 0.5, &[0.3, 0.1], &[-1.0, 0.5, 2.0, 6.0], &IntegratorConfig::default()).unwrap();
        for (_, v) in &sol.values {
            assert!(v.iter().all(|c| *c == 0.0));
        }
    }

    #[test]
    fn quadrature_when_psi_vanishes() {
        let s = sys(&["cos(t)", "0"], &["0", "0"]);
        let sol = eta(&s, 0.0, &[0.2, 0.4], &[PI / 2.0], &IntegratorConfig::default()).unwrap();
        let v = &sol.values[0].1;
        assert!((v[0] - 1.0).abs() < 1e-10 && v[1].abs() < 1e-14, "{v:?}");
    }

    #[test]
    fn anchor_is_exact_zero_and_range_checked() {
        let s = registry::e1_circle();
        let sol = eta(&s, 1.0, &[1.0, 0.0], &[1.0], &IntegratorConfig::default()).unwrap();
        assert_eq!(sol.values[0].1, vec![0.0, 0.0]);
        assert!(eta(&s, -0.1, &[1.0, 0.0], &[1.0], &IntegratorConfig::default()).is_err());
        assert!(eta(&s, 7.0, &[1.0, 0.0], &[1.0], &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn defect_family_matches_direct_runs() {
        let cfg = IntegratorConfig::default();
        for s in [registry::e1_circle(), registry::e2_resonance()] {
            for xi in [[1.0, 0.0], [0.6, 0.8], [0.2, -0.3]] {
                let fam = DefectFamily::new(&s, &xi, &cfg).unwrap();
                for anchor in [0.0, 0.7, 3.0, 2.0 * PI] {
                    let a = fam.at(anchor).unwrap();
                    let b = eta_defect(&s, anchor, &xi, &cfg).unwrap();
                    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    // E1 has monodromy multiplier exp(-4 pi); both routes lose digits near s = T.
                    for i in 0..2 {
                        assert!((a[i] - b[i]).abs() < 1e-6 * scale, "{} s={anchor} {a:?} {b:?}", s.name);
                    }
                }
            }
        }
    }

    #[test]
    fn defect_field_matches_direct_runs() {
        let s = registry::e1_circle();
        let cfg = IntegratorConfig::default();
        for anchor in [0.0, 1.3, 2.0 * PI] {
            let field = eta_defect_field(&s, anchor, &cfg).unwrap();
            for xi in [[1.0, 0.0], [0.6, 0.8], [0.2, -0.3]] {
                let a = field.eval(&xi).unwrap();
                let b = eta_defect(&s, anchor, &xi, &cfg).unwrap();
                let sol = eta(&s, anchor, &xi, &[0.0, s.period], &cfg).unwrap();
                let c: Vec<f64> = sol.values[1].1.iter().zip(&sol.values[0].1).map(|(p, q)| p - q).collect();
                for i in 0..2 {
                    assert!((a[i] - b[i]).abs() < 1e-7 * (1.0 + b[i].abs()), "{a:?} {b:?}");
                    assert!((c[i] - b[i]).abs() < 1e-7 * (1.0 + b[i].abs()), "{c:?} {b:?}");
                }
            }
            assert_eq!(field.cached(), if anchor == 0.0 { 0 } else { 3 });
        }
    }

    #[test]
    fn defect_reduces_to_period_integral_without_psi() {
        // psi = 0: defect = int_0^T phi(tau, xi) d tau = T f0(xi)
        let s = sys(&["-x1 + cos(t)^2", "x1*x2 + sin(t)"], &["0", "0"]);
        let xi = [0.7, -1.2];
        let d = eta_defect(&s, 1.1, &xi, &IntegratorConfig::default()).unwrap();
        let t = 2.0 * PI;
        assert!((d[0] - t * (-xi[0] + 0.5)).abs() < 1e-9, "{d:?}");
        assert!((d[1] - t * xi[0] * xi[1]).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn identity_monodromy_for_zero_matrix() {
        let rep = monodromy(|_| Ok(DMatrix::zeros(3, 3)), 3, 1.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(rep.matrix, DMatrix::identity(3, 3));
        assert_eq!(rep.multipliers.len(), 1);
        assert_eq!(rep.multipliers[0].multiplicity, 3);
    }

    #[test]
    fn scalar_growth_multiplier() {
        let rep = monodromy(|_| Ok(DMatrix::from_element(1, 1, 1.0)), 1, 1.0, &IntegratorConfig::default()).unwrap();
        assert!((rep.eigenvalues[0].re - E).abs() < 1e-9);
        assert!((rep.trace_integral - 1.0).abs() < 1e-14);
        assert!(rep.liouville_rel_error() < 1e-9);
    }

    #[test]
    fn time_dependent_liouville() {
        let a = |t: f64| {
            Ok(DMatrix::from_row_slice(2, 2, &[t.cos(), 1.0, -0.5, -0.3 + t.sin()]))
        };
        let rep = monodromy(a, 2, 2.0 * PI, &IntegratorConfig::default()).unwrap();
        assert!((rep.trace_integral + 0.3 * 2.0 * PI).abs() < 1e-12);
        assert!(rep.liouville_rel_error() < 1e-6);
    }

    #[test]
    fn trivial_flow_has_double_multiplier() {
        let s = sys(&["0", "0"], &["0", "0"]);
        let cfg = IntegratorConfig::default();
        let cycle = periodic_cycle(&s, &[0.5, 0.5], 1e-9, &cfg).unwrap();
        let rep = floquet_condition_a3(&s, &cycle, &[0.0, 1.0], &cfg, &FloquetConfig::default()).unwrap();
        assert!(!rep.holds);
        for p in &rep.phases {
            assert!(p.has_one && !p.simple && p.spectral_gap < 1e-9);
        }
    }

    #[test]
    fn non_periodic_cycle_rejected() {
        let s = registry::e1_circle();
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            periodic_cycle(&s, &[0.5, 0.0], 1e-7, &cfg),
            Err(Error::NotPeriodic { .. })
        ));
    }

    #[test]
    fn circle_multipliers_and_liouville() {
        let s = registry::e1_circle();
        let cfg = IntegratorConfig::default();
        let cycle = periodic_cycle(&s, &[1.0, 0.0], 1e-8, &cfg).unwrap();
        let rep = floquet_condition_a3(&s, &cycle, &[0.0, 2.0], &cfg, &FloquetConfig::default()).unwrap();
        assert!(rep.holds);
        let small = (-4.0 * PI).exp();
        for p in &rep.phases {
            assert!(p.distance_to_one < 1e-8, "{}", p.distance_to_one);
            assert!((p.multipliers[1].re - small).abs() < 1e-9 * 1e3 * small.max(1e-9));
            assert!(p.liouville_rel_error < 1e-6, "{}", p.liouville_rel_error);
        }
    }
}
