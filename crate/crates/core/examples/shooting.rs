//! Periodic orbits of the perturbed circle system by shooting, membership in
//! the localization set, and the convergence rate as `eps -> 0`.
//!
//! cargo run --release --example shooting

use perturbed_orbits::periodic::{eps_sweep, membership_x, orbit, shoot, CycleReference, SeedStrategy, ShootConfig};
use perturbed_orbits::topology::{PlanarRegion, Region};
use perturbed_orbits::{registry, IntegratorConfig};

fn main() {
    let sys = registry::e1_circle();
    let cfg = IntegratorConfig::default();
    let scfg = ShootConfig::default();
    let region: Region = PlanarRegion::unit_disk().into();

    let r = shoot(&sys, 0.01, &[0.0, 0.0], &cfg, &scfg).expect("shooting");
    println!(
        "eps = 0.01: xi = ({:+.9}, {:+.9}), residual {:.2e}, {} iterations ({:?})",
        r.xi[0], r.xi[1], r.residual, r.iterations, r.direction
    );
    println!("residual history {:?}", r.residual_history);
    let mults: Vec<String> = r.multipliers.iter().map(|m| format!("{:.4}", m.re)).collect();
    println!("period-map multipliers [{}]", mults.join(", "));
    let orb = orbit(&sys, &r, &cfg).expect("orbit");
    let m = membership_x(&sys, &orb, &region, &cfg).expect("membership");
    println!("pullback stays in U: {} (margin {:.4})", m.in_x, m.margin);

    let rep = eps_sweep(
        &sys,
        &region,
        &[1e-2, 5e-3, 2.5e-3],
        &SeedStrategy::Fixed(vec![0.0, 0.0]),
        &CycleReference::PeriodicSet,
        &cfg,
        &scfg,
    )
    .expect("sweep");
    println!("\n{:>8} {:>12} {:>16}", "eps", "residual", "dist to set");
    for e in &rep.entries {
        let res = e.result.as_ref().map(|r| r.residual).unwrap_or(f64::NAN);
        println!("{:8} {:12.2e} {:16.9e}", e.eps, res, e.cycle_distance.unwrap_or(f64::NAN));
    }
    println!("log-log slope {:.6}", rep.slope.unwrap_or(f64::NAN));
}
