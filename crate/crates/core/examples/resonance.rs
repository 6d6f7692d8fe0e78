//! Forced van der Pol at resonance: zeros of the averaged map `H(a, theta)`,
//! their local degrees, and confirmation by shooting at small `eps`.
//!
//! cargo run --release --example resonance

use std::f64::consts::{FRAC_PI_2, PI};

use perturbed_orbits::conditions::{cubic_amplitude_root, resonance_coords, ResonanceMap};
use perturbed_orbits::periodic::{shoot, ShootConfig};
use perturbed_orbits::topology::WindingConfig;
use perturbed_orbits::{registry, IntegratorConfig};

fn main() {
    let sys = registry::e2_resonance();
    let map = ResonanceMap::new("(1 - x1^2)*x2 + lam*cos(t)", &sys.params).expect("forcing parses");
    let rep = map.find_zeros((0.5, 4.0), (0.0, 2.0 * PI), (8, 8)).expect("zeros");
    let a_star = cubic_amplitude_root();
    println!("amplitude predicted by a^3 - 4a - 4 = 0: {a_star:.9}");

    for z in &rep.zeros {
        let det_exact = -PI * PI * (0.75 * z.a * z.a - 1.0);
        let deg = map.box_degree(z.a, z.theta, 0.2, &WindingConfig::default()).expect("box degree");
        println!(
            "zero a = {:.9}, theta = {:.9} (pi/2 {:+.1e}); det {:.6} vs {:.6}; box degree {}",
            z.a,
            z.theta,
            z.theta - FRAC_PI_2,
            z.det,
            det_exact,
            deg.degree
        );
        let eps = 1e-3;
        let seed = resonance_coords(z.a, z.theta);
        let orbit = shoot(&sys, eps, &seed, &IntegratorConfig::default(), &ShootConfig::default()).expect("shooting");
        println!(
            "  eps = {eps}: periodic orbit at ({:+.6}, {:+.6}), amplitude {:.6}, residual {:.2e}",
            orbit.xi[0],
            orbit.xi[1],
            orbit.xi[0].hypot(orbit.xi[1]),
            orbit.residual
        );
    }
}
