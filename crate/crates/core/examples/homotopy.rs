//! Comparing the rotation numbers of two perturbations through the
//! straight-line homotopy of their period defects.
//!
//! cargo run --release --example homotopy

use perturbed_orbits::conditions::{theorem2_compare, uniform_grid, Tolerances};
use perturbed_orbits::registry::{random_homotopy_pair, vanishing_homotopy_pair};
use perturbed_orbits::topology::{PlanarRegion, WindingConfig};
use perturbed_orbits::IntegratorConfig;

fn main() {
    let cfg = IntegratorConfig::default();
    let wcfg = WindingConfig::default();
    let tol = Tolerances::default();
    let disk = PlanarRegion::unit_disk();
    let lambda = uniform_grid(1.0, 11);

    for seed in 0..5 {
        let (a, b) = random_homotopy_pair(seed);
        let s_grid = uniform_grid(a.period, 5);
        let h = theorem2_compare(&a, &b, &disk, &lambda, &s_grid, 128, &cfg, &wcfg, &tol).expect("compare");
        println!(
            "seed {seed}: degrees {:?} / {:?}, min |homotopy| {:.3e}: {}",
            h.degree1, h.degree2, h.segment_min, h.report.verdict
        );
    }

    let (a, b) = vanishing_homotopy_pair();
    let s_grid = uniform_grid(a.period, 5);
    let h = theorem2_compare(&a, &b, &disk, &lambda, &s_grid, 128, &cfg, &wcfg, &tol).expect("compare");
    println!("\n{} vs {}: {}", a.name, b.name, h.report.verdict_line());
    if let Some(w) = &h.report.witness {
        println!("  witness {:?} lambda {:?}: {}", w.point, w.param, w.note);
    }
}
