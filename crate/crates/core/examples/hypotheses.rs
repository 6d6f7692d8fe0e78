//! Hypothesis checks A0-A3 with verdicts and witnesses.
//!
//! cargo run --release --example hypotheses

use std::collections::BTreeMap;

use perturbed_orbits::conditions::{check_a0, check_a1, check_a2, check_a3, uniform_grid, Tolerances};
use perturbed_orbits::topology::{PlanarRegion, Region, WindingConfig};
use perturbed_orbits::variational::{periodic_cycle, FloquetConfig};
use perturbed_orbits::{registry, IntegratorConfig, SystemDef};

fn main() {
    let cfg = IntegratorConfig::default();
    let tol = Tolerances::default();
    let disk: Region = PlanarRegion::unit_disk().into();
    let e1 = registry::e1_circle();

    let a0 = check_a0(&e1, &disk, 256, &cfg, &tol).expect("A0");
    println!("e1-circle: {}", a0.verdict_line());

    // The circle system fails A1: its defect vanishes where tan(theta) = -2.
    let s_grid = uniform_grid(e1.period, 9);
    let a1 = check_a1(&e1, &disk, &s_grid, 128, &cfg, &tol).expect("A1");
    println!("e1-circle: {}", a1.verdict_line());
    if let Some(w) = &a1.witness {
        println!("  witness {:?}: {}", w.point, w.note);
    }

    let cycle = periodic_cycle(&e1, &[1.0, 0.0], tol.cycle_tol, &cfg).expect("cycle");
    let (a3, _) = check_a3(&e1, &cycle, &uniform_grid(e1.period, 17), &cfg, &FloquetConfig::default()).expect("A3");
    println!("e1-circle: {}", a3.verdict_line());

    // A contracting perturbation of the trivial flow satisfies A1 and A2 with degree 1.
    let inward = SystemDef::from_sources("inward", e1.period, &["-x1 + 0.3*cos(t)", "-x2"], &["0", "0"], BTreeMap::new())
        .expect("parses");
    let a1 = check_a1(&inward, &disk, &s_grid, 128, &cfg, &tol).expect("A1");
    println!("inward:    {}", a1.verdict_line());
    let (a2, deg) = check_a2(&inward, &disk, &cfg, &WindingConfig::default()).expect("A2");
    println!("inward:    {}", a2.verdict_line());
    if let Some(d) = deg {
        println!("  degree {} from {} boundary samples", d.degree, d.samples_used);
    }
}
