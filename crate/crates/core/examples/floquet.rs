//! Monodromy and Floquet multipliers of the linearization along the cycle.
//!
//! cargo run --release --example floquet

use std::f64::consts::PI;

use perturbed_orbits::conditions::uniform_grid;
use perturbed_orbits::variational::{floquet_condition_a3, monodromy, periodic_cycle, FloquetConfig};
use perturbed_orbits::{registry, IntegratorConfig};

fn main() {
    let sys = registry::e1_circle();
    let cfg = IntegratorConfig::default();
    let cycle = periodic_cycle(&sys, &[1.0, 0.0], 1e-7, &cfg).expect("cycle");

    let rep = monodromy(
        |t| {
            let x = cycle.eval(t)?;
            sys.psi_jac(t, &x)
        },
        2,
        sys.period,
        &cfg,
    )
    .expect("monodromy");
    println!("monodromy matrix:{}", rep.matrix);
    for m in &rep.multipliers {
        println!("multiplier {:+.12e} {:+.3e}i (multiplicity {})", m.value.re, m.value.im, m.multiplicity);
    }
    println!("expected   1 and exp(-4 pi) = {:.12e}", (-4.0 * PI).exp());
    println!("Liouville relative error {:.3e}", rep.liouville_rel_error());

    let fl = floquet_condition_a3(&sys, &cycle, &uniform_grid(sys.period, 9), &cfg, &FloquetConfig::default()).expect("A3");
    println!("\nphase shifts:");
    for p in &fl.phases {
        println!("  theta {:.4}: |mu* - 1| = {:.2e}, gap = {:.6}", p.theta, p.distance_to_one, p.spectral_gap);
    }
    println!("1 is a simple multiplier at every phase: {}", fl.holds);
}
