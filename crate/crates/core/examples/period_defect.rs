//! The auxiliary solution `eta(t, s, xi)` and its period defect
//! `eta(T, s, xi) - eta(0, s, xi)` for the circle system.
//!
//! On the unit circle the defect is normal to the cycle with component
//! proportional to `2 cos(theta) + sin(theta)`, so it vanishes where
//! `tan(theta) = -2` for every anchor `s`.
//!
//! cargo run --example period_defect

use std::f64::consts::PI;

use perturbed_orbits::variational::{eta, eta_defect, DefectFamily};
use perturbed_orbits::{registry, IntegratorConfig};

fn main() {
    let sys = registry::e1_circle();
    let cfg = IntegratorConfig::default();

    let sol = eta(&sys, 1.0, &[1.0, 0.0], &[0.0, 1.0, PI, 2.0 * PI], &cfg).expect("eta");
    println!("eta(t, s = 1, xi = (1, 0)):");
    for (t, v) in &sol.values {
        println!("  t = {t:.4}  ({:+.6e}, {:+.6e})", v[0], v[1]);
    }

    println!("\nnormal defect component on the unit circle, s = 0");
    println!("{:>8} {:>16} {:>16}", "theta", "numeric", "closed form");
    let factor = (1.0 - (-4.0 * PI).exp()) / 5.0;
    for k in 0..8 {
        let th = 2.0 * PI * k as f64 / 8.0;
        let xi = [th.cos(), th.sin()];
        let d = eta_defect(&sys, 0.0, &xi, &cfg).unwrap();
        let normal = d[0] * xi[0] + d[1] * xi[1];
        println!("{th:8.4} {normal:+16.9e} {:+16.9e}", factor * (2.0 * th.cos() + th.sin()));
    }

    // One integration per xi serves every anchor s.
    let th0 = PI - 2.0f64.atan();
    let xi = [th0.cos(), th0.sin()];
    let family = DefectFamily::new(&sys, &xi, &cfg).unwrap();
    println!("\nat tan(theta) = -2, xi = ({:+.6}, {:+.6}):", xi[0], xi[1]);
    for s in [0.0, 1.0, 2.5, 4.0] {
        let d = family.at(s).unwrap();
        println!("  s = {s:.1}  |defect| = {:.3e}", d[0].hypot(d[1]));
    }
}
