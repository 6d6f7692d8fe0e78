//! Regions, winding numbers along their boundaries, and product degrees.
//!
//! cargo run --release --example winding

use std::sync::Arc;

use perturbed_orbits::topology::{product_degree, winding_number, PlanarRegion, Point, ProductRegion, WindingConfig};

fn main() {
    let wcfg = WindingConfig::default();
    let disk = PlanarRegion::unit_disk();

    // z^n has degree n around the origin.
    for n in 1..=3 {
        let d = winding_number(
            move |p: Point| {
                let (r, a) = (p[0].hypot(p[1]), p[1].atan2(p[0]));
                Ok([r.powi(n) * (n as f64 * a).cos(), r.powi(n) * (n as f64 * a).sin()])
            },
            &disk,
            &wcfg,
        )
        .expect("degree");
        println!("z^{n} on the unit disk: degree {}", d.degree);
    }

    let conj = |p: Point| Ok([p[0], -p[1]]);
    println!("conj(z): degree {}", winding_number(conj, &disk, &wcfg).unwrap().degree);

    let square = PlanarRegion::polygon(vec![[2.0, 2.0], [3.0, 2.0], [3.0, 3.0], [2.0, 3.0]], None).unwrap();
    println!("identity on a square away from 0: degree {}", winding_number(|p| Ok(p), &square, &wcfg).unwrap().degree);

    let star = PlanarRegion::parametric(
        Arc::new(|u: f64| {
            let a = std::f64::consts::TAU * u;
            let r = 1.0 + 0.4 * (5.0 * a).cos();
            [r * a.cos(), r * a.sin()]
        }),
        Some([0.0, 0.0]),
        1024,
    )
    .unwrap();
    println!("identity on a five-pointed star: degree {}", winding_number(|p| Ok(p), &star, &wcfg).unwrap().degree);

    match winding_number(|p: Point| Ok([p[0] - 1.0, p[1]]), &disk, &wcfg) {
        Ok(d) => println!("unexpected degree {}", d.degree),
        Err(e) => println!("field vanishing on the boundary: {e}"),
    }

    // Degree on a product of planar regions multiplies over the factors.
    let prod = ProductRegion::new(vec![disk.clone(), disk]).unwrap();
    let fields: Vec<Box<dyn Fn(Point) -> perturbed_orbits::Result<Point> + Sync>> = vec![
        Box::new(|p: Point| Ok([-p[0], -p[1]])),
        Box::new(|p: Point| Ok([p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]])),
    ];
    let d = product_degree(&fields, &prod, &wcfg).unwrap();
    println!("(-z, z^2) on the bidisk: degree {}", d.degree);
}
