//! `T`-periodic solutions of the full system by Newton shooting on
//! `P_eps(xi) = x(T; 0, xi, eps) - xi`, membership in the localization set
//! `X`, and sweeps over `eps`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::{flow_omega, integrate, IntegratorConfig, SystemDef, Trajectory};
use crate::topology::Region;
use crate::variational::flow_jacobian;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootConfig {
    pub shoot_tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// `sigma_min(DP) <= singular_tol * max(1, sigma_max)` counts as singular.
    pub singular_tol: f64,
    pub direction: ShootDirection,
}

/// Time direction of the period map used for Newton. A `T`-periodic orbit
/// is a fixed point of both `x(T; xi)` and `x(-T; xi)`; the backward map is
/// well conditioned near repelling orbits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShootDirection {
    Forward,
    Backward,
    /// Forward first; on failure backward, then a forward polish.
    Auto,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            shoot_tol: 1e-9,
            max_iterations: 25,
            max_halvings: 40,
            singular_tol: 1e-8,
            direction: ShootDirection::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbitResult {
    pub eps: f64,
    pub xi: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `DP` singular at the returned point (expected at `eps = 0` on a cycle).
    pub singular: bool,
    pub sigma_min: f64,
    pub residual_history: Vec<f64>,
    /// Eigenvalues of the period-map Jacobian `dx(T)/dxi` at `xi`.
    pub multipliers: Vec<Complex<f64>>,
    /// Direction whose Newton iteration located the orbit.
    pub direction: ShootDirection,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn signed_period_map(sys: &SystemDef, eps: f64, xi: &[f64], t1: f64, cfg: &IntegratorConfig) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (end, y) = flow_jacobian(sys, eps, 0.0, t1, xi, cfg)?;
    let p: Vec<f64> = end.iter().zip(xi).map(|(a, b)| a - b).collect();
    Ok((p, y))
}

fn sorted_eigs(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im)));
    ev
}

fn sigma_range(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = m.clone().singular_values();
    (
        sv.iter().copied().fold(f64::INFINITY, f64::min),
        sv.iter().copied().fold(0.0, f64::max),
    )
}

/// Damped Newton shooting from `seed`.
pub fn shoot(sys: &SystemDef, eps: f64, seed: &[f64], cfg: &IntegratorConfig, scfg: &ShootConfig) -> Result<PeriodicOrbitResult> {
    if !(eps >= 0.0) {
        return Err(Error::Invalid(format!("eps must be nonnegative, got {eps}")));
    }
    if seed.len() != sys.dim() || seed.iter().any(|c| !c.is_finite()) {
        return Err(Error::Invalid(format!("seed must be a finite vector of length {}", sys.dim())));
    }
    match scfg.direction {
        ShootDirection::Forward => newton(sys, eps, seed, sys.period, cfg, scfg),
        ShootDirection::Backward => {
            let back = newton(sys, eps, seed, -sys.period, cfg, scfg)?;
            polish(sys, eps, back, cfg, scfg)
        }
        ShootDirection::Auto => match newton(sys, eps, seed, sys.period, cfg, scfg) {
            Ok(r) => Ok(r),
            Err(first) => {
                let Ok(back) = newton(sys, eps, seed, -sys.period, cfg, scfg) else {
                    return Err(first);
                };
                polish(sys, eps, back, cfg, scfg)
            }
        },
    }
}

/// Forward Newton from a backward solution, so the reported residual and
/// multipliers refer to the forward period map.
fn polish(sys: &SystemDef, eps: f64, back: PeriodicOrbitResult, cfg: &IntegratorConfig, scfg: &ShootConfig) -> Result<PeriodicOrbitResult> {
    if back.singular && eps == 0.0 {
        return Ok(back);
    }
    let mut fwd = newton(sys, eps, &back.xi, sys.period, cfg, scfg)?;
    let mut history = back.residual_history;
    history.extend(fwd.residual_history);
    fwd.residual_history = history;
    fwd.iterations += back.iterations;
    fwd.direction = ShootDirection::Backward;
    Ok(fwd)
}

fn newton(sys: &SystemDef, eps: f64, seed: &[f64], horizon: f64, cfg: &IntegratorConfig, scfg: &ShootConfig) -> Result<PeriodicOrbitResult> {
    let k = sys.dim();
    let mut xi = seed.to_vec();
    let (mut p, mut y) = signed_period_map(sys, eps, &xi, horizon, cfg)?;
    let mut r = norm(&p);
    let mut history = vec![r];
    let mut iterations = 0;
    let finish = |xi: Vec<f64>, r: f64, y: &DMatrix<f64>, it: usize, hist: Vec<f64>| {
        let j = y - DMatrix::identity(k, k);
        let (smin, smax) = sigma_range(&j);
        PeriodicOrbitResult {
            eps,
            xi,
            residual: r,
            iterations: it,
            converged: r <= scfg.shoot_tol,
            singular: smin <= scfg.singular_tol * smax.max(1.0),
            sigma_min: smin,
            residual_history: hist,
            multipliers: sorted_eigs(y),
            direction: if horizon > 0.0 { ShootDirection::Forward } else { ShootDirection::Backward },
        }
    };
    while r > scfg.shoot_tol {
        if iterations >= scfg.max_iterations {
            return Err(Error::NewtonStalled { residuals: history });
        }
        let j = &y - DMatrix::identity(k, k);
        let (smin, smax) = sigma_range(&j);
        if smin <= scfg.singular_tol * smax.max(1.0) {
            if eps == 0.0 {
                return Ok(finish(xi, r, &y, iterations, history));
            }
            return Err(Error::SingularJacobian { sigma_min: smin });
        }
        let step = j
            .lu()
            .solve(&DVector::from_column_slice(&p))
            .ok_or(Error::SingularJacobian { sigma_min: smin })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=scfg.max_halvings {
            let trial: Vec<f64> = xi.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
            if let Ok((tp, ty)) = signed_period_map(sys, eps, &trial, horizon, cfg) {
                let tr = norm(&tp);
                if tr < r {
                    xi = trial;
                    p = tp;
                    y = ty;
                    r = tr;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        history.push(r);
        if !accepted {
            return Err(Error::NewtonStalled { residuals: history });
        }
    }
    Ok(finish(xi, r, &y, iterations, history))
}

/// Full orbit on `[0, T]` through a shooting solution.
pub fn orbit(sys: &SystemDef, result: &PeriodicOrbitResult, cfg: &IntegratorConfig) -> Result<Trajectory> {
    integrate(sys.full_rhs(result.eps), 0.0, sys.period, &result.xi, cfg)
}

pub const MEMBERSHIP_GRID: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub in_x: bool,
    /// Smallest distance of `Omega(0, t, x(t))` to the boundary of `U`.
    pub margin: f64,
    /// First grid time whose pullback leaves `U`.
    pub witness_time: Option<f64>,
}

/// Whether `Omega(0, t, x(t))` stays in `U` for `t` on a 256-point grid of `[0, T]`.
pub fn membership_x(sys: &SystemDef, orbit: &Trajectory, region: &Region, cfg: &IntegratorConfig) -> Result<Membership> {
    let mut margin = f64::INFINITY;
    let mut witness_time = None;
    for i in 0..MEMBERSHIP_GRID {
        let t = if i == MEMBERSHIP_GRID - 1 {
            sys.period
        } else {
            sys.period * i as f64 / (MEMBERSHIP_GRID - 1) as f64
        };
        let x = orbit.eval(t)?;
        let back = flow_omega(sys, 0.0, t, &x, cfg)?;
        margin = margin.min(region.boundary_distance(&back));
        if witness_time.is_none() && !region.contains(&back) {
            witness_time = Some(t);
        }
    }
    Ok(Membership {
        in_x: witness_time.is_none(),
        margin,
        witness_time,
    })
}

/// Distance from a point to the nearest `T`-periodic point of the
/// unperturbed system, by damped Gauss-Newton on `Omega(T,0,zeta) - zeta`
/// started at the point. Directions with singular values below `1e-8`
/// relative are dropped, so along a continuum of periodic points the
/// nearest one is found.
pub fn distance_to_periodic_set(sys: &SystemDef, xi: &[f64], cfg: &IntegratorConfig) -> Result<(f64, Vec<f64>)> {
    // Both time directions share the fixed points; the backward map is the
    // well-conditioned one near repellers. Keep the nearest converged one.
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut fallback = None;
    for horizon in [sys.period, -sys.period] {
        let (z, converged) = gauss_newton_fixed_point(sys, xi, horizon, cfg)?;
        let d = norm(&z.iter().zip(xi).map(|(a, b)| a - b).collect::<Vec<_>>());
        if converged {
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, z));
            }
        } else if fallback.is_none() {
            fallback = Some((d, z));
        }
    }
    Ok(best.or(fallback).expect("at least one direction ran"))
}

fn gauss_newton_fixed_point(sys: &SystemDef, xi: &[f64], horizon: f64, cfg: &IntegratorConfig) -> Result<(Vec<f64>, bool)> {
    let k = sys.dim();
    let mut z = xi.to_vec();
    let (mut p, mut y) = signed_period_map(sys, 0.0, &z, horizon, cfg)?;
    let tol = |z: &[f64]| 1e-11 * (1.0 + norm(z));
    for _ in 0..60 {
        let r = norm(&p);
        if r <= 1e-13 * (1.0 + norm(&z)) {
            break;
        }
        let j = &y - DMatrix::identity(k, k);
        let svd = j.svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let step = svd
            .solve(&DVector::from_column_slice(&p), 1e-8 * smax.max(1e-300))
            .map_err(|e| Error::Invalid(e.to_string()))?;
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
            if let Ok((tp, ty)) = signed_period_map(sys, 0.0, &trial, horizon, cfg) {
                if norm(&tp) < r {
                    z = trial;
                    p = tp;
                    y = ty;
                    moved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !moved || lambda * norm(step.as_slice()) <= 1e-15 * (1.0 + norm(&z)) {
            break;
        }
    }
    let converged = norm(&p) <= tol(&z);
    Ok((z, converged))
}

/// Minimum distance from `p` to a closed curve given as a trajectory over
/// one period: dense sampling followed by golden-section refinement.
pub fn distance_to_curve(curve: &Trajectory, p: &[f64]) -> Result<f64> {
    let (lo, hi) = curve.interval();
    let n = 2048;
    let d = |t: f64| -> Result<f64> {
        let x = curve.eval(t)?;
        Ok(norm(&x.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>()))
    };
    let h = (hi - lo) / n as f64;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=n {
        let t = lo + h * i as f64;
        let v = d(t.min(hi))?;
        if v < best.0 {
            best = (v, t);
        }
    }
    let (mut a, mut b) = ((best.1 - h).max(lo), (best.1 + h).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let e = a + g * (b - a);
        if d(c)? < d(e)? {
            b = e;
        } else {
            a = c;
        }
    }
    Ok(best.0.min(d(0.5 * (a + b))?))
}

#[derive(Debug, Clone)]
pub enum SeedStrategy {
    /// Every `eps` starts from the same point.
    Fixed(Vec<f64>),
    /// The first `eps` starts from the point, later ones from the previous solution.
    WarmStart(Vec<f64>),
}

/// What "distance to the cycle" is measured against.
#[derive(Debug, Clone)]
pub enum CycleReference {
    /// Nearest `T`-periodic point of the unperturbed system.
    PeriodicSet,
    /// A given closed curve.
    Curve(Trajectory),
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub eps: f64,
    pub result: std::result::Result<PeriodicOrbitResult, Error>,
    pub membership: Option<Membership>,
    pub boundary_distance: Option<f64>,
    pub cycle_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Least-squares slope of `ln(cycle_distance)` against `ln(eps)`.
    pub slope: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// positive pairs.
pub fn log_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Shoots at every `eps`, records membership in `X`, the distance of the
/// solution to the region boundary and to the reference, and fits the rate.
/// Failures are recorded per entry and the sweep continues.
pub fn eps_sweep(
    sys: &SystemDef,
    region: &Region,
    eps_list: &[f64],
    strategy: &SeedStrategy,
    reference: &CycleReference,
    cfg: &IntegratorConfig,
    scfg: &ShootConfig,
) -> Result<SweepReport> {
    if let Some(e) = eps_list.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Invalid(format!("eps values must be positive, got {e}")));
    }
    let mut entries = Vec::with_capacity(eps_list.len());
    let (mut seed, warm) = match strategy {
        SeedStrategy::Fixed(s) => (s.clone(), false),
        SeedStrategy::WarmStart(s) => (s.clone(), true),
    };
    for &eps in eps_list {
        let result = shoot(sys, eps, &seed, cfg, scfg);
        let mut entry = SweepEntry {
            eps,
            result: result.clone(),
            membership: None,
            boundary_distance: None,
            cycle_distance: None,
        };
        if let Ok(res) = &result {
            if warm && res.converged {
                seed = res.xi.clone();
            }
            entry.boundary_distance = Some(region.boundary_distance(&res.xi));
            if let Ok(orb) = orbit(sys, res, cfg) {
                entry.membership = membership_x(sys, &orb, region, cfg).ok();
            }
            entry.cycle_distance = match reference {
                CycleReference::PeriodicSet => distance_to_periodic_set(sys, &res.xi, cfg).ok().map(|d| d.0),
                CycleReference::Curve(c) => distance_to_curve(c, &res.xi).ok(),
            };
        }
        entries.push(entry);
    }
    let pairs: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| e.result.as_ref().is_ok_and(|r| r.converged))
        .filter_map(|e| e.cycle_distance.map(|d| (e.eps, d)))
        .collect();
    Ok(SweepReport {
        slope: log_slope(&pairs),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::f64::consts::TAU;

    use super::*;
    use crate::registry;
    use crate::topology::PlanarRegion;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn scalar_forced_orbit() {
        let sys = SystemDef::from_sources("f", TAU, &["0"], &["-x1 + cos(t)"], BTreeMap::new()).unwrap();
        let r = shoot(&sys, 0.0, &[3.0], &cfg(), &ShootConfig::default()).unwrap();
        assert!(r.converged && !r.singular);
        assert!((r.xi[0] - 0.5).abs() < 1e-8);
        assert!((r.multipliers[0].re - (-TAU).exp()).abs() < 1e-9);
    }

    #[test]
    fn cycle_is_singular_at_zero_eps() {
        let e1 = registry::e1_circle();
        let r = shoot(&e1, 0.0, &[1.0, 0.0], &cfg(), &ShootConfig::default()).unwrap();
        assert!(r.singular && r.converged);
        assert!(r.multipliers.iter().any(|m| (m - Complex::new(1.0, 0.0)).norm() < 1e-6));
    }

    #[test]
    fn unit_circle_points_fixed_at_zero_eps() {
        let e1 = registry::e1_circle();
        for i in 0..32 {
            let a = TAU * i as f64 / 32.0;
            let (p, _) = signed_period_map(&e1, 0.0, &[a.cos(), a.sin()], e1.period, &cfg()).unwrap();
            assert!(norm(&p) <= 1e-7);
        }
    }

    #[test]
    fn membership_cases() {
        let sys = SystemDef::from_sources("z", TAU, &["0", "0"], &["0", "0"], BTreeMap::new()).unwrap();
        let region: Region = PlanarRegion::unit_disk().into();
        let inside = integrate(sys.full_rhs(0.0), 0.0, TAU, &[0.0, 0.0], &cfg()).unwrap();
        let m = membership_x(&sys, &inside, &region, &cfg()).unwrap();
        assert!(m.in_x && (m.margin - 1.0).abs() < 1e-12);
        let outside = integrate(sys.full_rhs(0.0), 0.0, TAU, &[2.0, 0.0], &cfg()).unwrap();
        let m = membership_x(&sys, &outside, &region, &cfg()).unwrap();
        assert_eq!(m.witness_time, Some(0.0));
    }

    #[test]
    fn slope_and_empty_sweep() {
        assert!((log_slope(&[(1.0, 2.0), (2.0, 4.0), (4.0, 8.0)]).unwrap() - 1.0).abs() < 1e-12);
        assert!(log_slope(&[(1.0, 2.0)]).is_none());
        let e1 = registry::e1_circle();
        let region: Region = PlanarRegion::unit_disk().into();
        let rep = eps_sweep(&e1, &region, &[], &SeedStrategy::Fixed(vec![0.0, 0.0]), &CycleReference::PeriodicSet, &cfg(), &ShootConfig::default()).unwrap();
        assert!(rep.entries.is_empty() && rep.slope.is_none());
    }

    #[test]
    fn curve_distance() {
        let e1 = registry::e1_circle();
        let c = integrate(e1.psi_rhs(), 0.0, TAU, &[1.0, 0.0], &cfg()).unwrap();
        assert!((distance_to_curve(&c, &[0.3, 0.4]).unwrap() - 0.5).abs() < 1e-9);
    }
}
