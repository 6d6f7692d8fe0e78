//! Melnikov-type integral `M(theta)` along the unit-circle cycle, and the
//! normal projection of the period defect for comparison.
//!
//! cargo run --release --example melnikov

use std::f64::consts::PI;

use perturbed_orbits::conditions::{defect_projection, melnikov_profile, uniform_grid, Tolerances};
use perturbed_orbits::variational::periodic_cycle;
use perturbed_orbits::{registry, IntegratorConfig};

fn main() {
    let sys = registry::e1_circle();
    let cfg = IntegratorConfig::default();
    let tol = Tolerances::default();
    let cycle = periodic_cycle(&sys, &[1.0, 0.0], tol.cycle_tol, &cfg).expect("cycle");
    let theta = uniform_grid(sys.period, 9);

    let prof = melnikov_profile(&sys, &cycle, &theta, &tol).expect("profile");
    let exact = -0.4 * ((4.0 * PI).exp() - 1.0);
    println!("closed form M = -(2/5)(exp(4 pi) - 1) = {exact:.9}");
    println!("weight exp(-int div) ranges over [{:.4}, {:.4e}]", prof.weight_min, prof.weight_max);
    println!("{}", prof.report(&tol).verdict_line());

    let proj = defect_projection(&sys, &cycle, &theta, 0.0, &cfg).expect("projection");
    println!("\n{:>8} {:>20} {:>14} {:>14}", "theta", "M", "rel err", "<defect, n>");
    for ((th, m), p) in theta.iter().zip(&prof.values).zip(&proj) {
        println!("{th:8.4} {m:20.9} {:14.3e} {p:+14.6e}", ((m - exact) / exact).abs());
    }
    println!("\nM keeps one sign while the defect projection changes sign:");
    println!("the exponential weight is not T-periodic for this cycle.");
}
