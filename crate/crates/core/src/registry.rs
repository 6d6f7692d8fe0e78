//! Built-in example systems.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_3;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flow::SystemDef;

pub const E1_NAME: &str = "e1-circle";
pub const E2_NAME: &str = "e2-resonance";
pub const E3_NAME: &str = "e3-scalar";

/// Planar system with the attracting unit-circle cycle `(cos t, sin t)` and
/// constant perturbation `(1, 0)`; `T = 2*pi`.
pub fn e1_circle() -> SystemDef {
    SystemDef::from_sources(
        E1_NAME,
        2.0 * std::f64::consts::PI,
        &["1", "0"],
        &["-x2 + x1*(1 - x1^2 - x2^2)", "x1 + x2*(1 - x1^2 - x2^2)"],
        BTreeMap::new(),
    )
    .expect("built-in system parses")
}

/// Forced van der Pol in rotating form: `psi = (-x2, x1)`,
/// `phi = (0, f(t, u, v))` with `f(t, u, v) = (1 - u^2) v + lam*cos(t)`
/// evaluated at `u = -x1`, `v = x2`.
pub fn e2_resonance_with(lam: f64) -> SystemDef {
    let mut params = BTreeMap::new();
    params.insert("lam".to_string(), lam);
    let mut sys = SystemDef::from_sources(
        E2_NAME,
        2.0 * std::f64::consts::PI,
        &["0", "(1 - x1^2)*x2 + lam*cos(t)"],
        &["-x2", "x1"],
        params,
    )
    .expect("built-in system parses");
    sys.notes = vec![
        "phi = (0, f(t, -x1, x2)) with f(t,u,v) = (1 - u^2)*v + lam*cos(t); u = -x1 solves u'' + u = eps*f(t, u, u')".into(),
        "resonance coordinates: xi(a, theta) = (-a*cos(theta), a*sin(theta)); the argument order of f is a convention choice (u = -x1, v = x2)".into(),
    ];
    sys
}

pub fn e2_resonance() -> SystemDef {
    e2_resonance_with(1.0)
}

/// Scalar standard-form system `x' = eps*(-x + cos t)`, `psi = 0`.
pub fn e3_scalar() -> SystemDef {
    SystemDef::from_sources(
        E3_NAME,
        2.0 * std::f64::consts::PI,
        &["-x1 + cos(t)"],
        &["0"],
        BTreeMap::new(),
    )
    .expect("built-in system parses")
}

/// Seeded pair of perturbations of `psi = 0` on the plane for homotopy trials.
///
/// Each member is `phi_i(t, x) = rho_i R(alpha_i) D x + b_i + c_i cos(t)`
/// with `D = diag(1, sigma)` shared by the pair (`sigma = +-1`),
/// `rho_i in [1, 2]`, `alpha_i in [-pi/3, pi/3]`, `|b_i| <= 0.25` and
/// `c_i in [-1, 1]^2`. On the unit circle both rotated images of `D xi` lie
/// within `pi/3` of `D xi`, so every convex combination has norm at least
/// `1/2 - 1/4`; the straight-line homotopy never vanishes and both degrees
/// equal `sigma`.
pub fn random_homotopy_pair(seed: u64) -> (SystemDef, SystemDef) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut member = |label: &str| {
        let rho = rng.random_range(1.0..=2.0);
        let alpha = rng.random_range(-FRAC_PI_3..=FRAC_PI_3);
        let br = 0.25 * rng.random::<f64>();
        let bphi = rng.random_range(0.0..std::f64::consts::TAU);
        let c: [f64; 2] = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        let (s, co) = alpha.sin_cos();
        // rho R(alpha) D with D = diag(1, sigma)
        let m = [rho * co, -rho * s * sigma, rho * s, rho * co * sigma];
        let b = [br * bphi.cos(), br * bphi.sin()];
        let phi = [
            format!("({:?})*x1 + ({:?})*x2 + ({:?}) + ({:?})*cos(t)", m[0], m[1], b[0], c[0]),
            format!("({:?})*x1 + ({:?})*x2 + ({:?}) + ({:?})*cos(t)", m[2], m[3], b[1], c[1]),
        ];
        SystemDef::from_sources(format!("random-{label}-{seed}"), std::f64::consts::TAU, &phi, &["0".to_string(), "0".to_string()], BTreeMap::new())
            .expect("generated field parses")
    };
    let a = member("a");
    let b = member("b");
    (a, b)
}

/// `phi_1 = (1, 0)` and `phi_2 = -x` with `psi = 0`: the straight-line
/// homotopy vanishes at `xi = (1, 0)`, `lambda = 1/2`.
pub fn vanishing_homotopy_pair() -> (SystemDef, SystemDef) {
    let tau = std::f64::consts::TAU;
    let a = SystemDef::from_sources("constant", tau, &["1", "0"], &["0", "0"], BTreeMap::new()).expect("parses");
    let b = SystemDef::from_sources("minus-identity", tau, &["-x1", "-x2"], &["0", "0"], BTreeMap::new()).expect("parses");
    (a, b)
}

pub fn builtin_registry() -> Vec<SystemDef> {
    vec![e1_circle(), e2_resonance(), e3_scalar()]
}

pub fn builtin(name: &str) -> Option<SystemDef> {
    builtin_registry().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names() {
        let mut names: Vec<String> = builtin_registry().into_iter().map(|s| s.name).collect();
        names.sort();
        assert_eq!(names, [E1_NAME, E2_NAME, E3_NAME]);
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn circle_is_a_solution_of_e1() {
        // x0(t) = (cos t, sin t): psi(x0) must equal x0'
        let sys = e1_circle();
        for i in 0..16 {
            let t = i as f64 * 0.4;
            let v = sys.psi_at(t, &[t.cos(), t.sin()]).unwrap();
            assert!((v[0] + t.sin()).abs() < 1e-15 && (v[1] - t.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn e2_is_trace_free() {
        let sys = e2_resonance();
        assert_eq!(sys.psi_div(0.3, &[1.0, 2.0]).unwrap(), 0.0);
    }
}
