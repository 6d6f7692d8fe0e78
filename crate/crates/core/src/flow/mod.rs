//! System definitions, adaptive integration with dense output, quadrature,
//! and the unperturbed flow `Omega(t, t0, xi)` of `x' = psi(t, x)`.

mod integrator;
mod quadrature;
mod system;
mod tableau;

pub use integrator::{integrate, integrate_endpoint, IntegratorConfig, Trajectory};
pub use quadrature::{GaussLegendre, PANELS_PER_PERIOD, PANEL_POINTS};
pub use system::{ExprField, FnField, JacobianSource, SystemDef, VectorField};

use crate::error::Result;

/// `Omega(t, t0, xi)`: state at `t` of the `eps = 0` solution through `(t0, xi)`.
/// Returns `xi` unchanged when `t == t0`.
pub fn flow_omega(sys: &SystemDef, t: f64, t0: f64, xi: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    if t == t0 {
        return Ok(xi.to_vec());
    }
    integrate_endpoint(sys.psi_rhs(), t0, t, xi, cfg)
}

/// Dense variant of [`flow_omega`] on the interval between `t0` and `t1`.
pub fn flow_trajectory(
    sys: &SystemDef,
    t0: f64,
    t1: f64,
    xi: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate(sys.psi_rhs(), t0, t1, xi, cfg)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::registry;

    #[test]
    fn identity_at_initial_time() {
        let cfg = IntegratorConfig::default();
        for sys in registry::builtin_registry() {
            let xi = vec![0.37; sys.dim()];
            assert_eq!(flow_omega(&sys, 1.25, 1.25, &xi, &cfg).unwrap(), xi);
        }
    }

    #[test]
    fn circle_cycle_returns_after_one_period() {
        let sys = registry::e1_circle();
        let cfg = IntegratorConfig::default();
        let x = flow_omega(&sys, 2.0 * PI, 0.0, &[1.0, 0.0], &cfg).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-8 && x[1].abs() < 1e-8, "{x:?}");
    }

    #[test]
    fn semigroup_on_circle_system() {
        let sys = registry::e1_circle();
        let cfg = IntegratorConfig::default();
        let xi = [0.4, -0.7];
        let mid = flow_omega(&sys, 1.0, 0.0, &xi, &cfg).unwrap();
        let a = flow_omega(&sys, 3.0, 1.0, &mid, &cfg).unwrap();
        let b = flow_omega(&sys, 3.0, 0.0, &xi, &cfg).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }
}
