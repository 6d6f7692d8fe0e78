//! Averaged field `Phi(xi) = -lim eta(-nT, 0, xi)/(nT)` and the first-order
//! error of the averaged approximation on `[0, d/eps]`.
//!
//! cargo run --release --example averaging

use perturbed_orbits::averaging::{averaged_field, eta_backward, solve_averaged, to_standard_form, verify_theorem4};
use perturbed_orbits::{registry, IntegratorConfig};

fn main() {
    let sys = registry::e3_scalar();
    let cfg = IntegratorConfig::default();

    // With psi = 0, eta(-nT, 0, xi) = -nT (xi) exactly for phi = -x + cos t.
    let back = eta_backward(&sys, &[0.5], &[1, 2, 4], &cfg).expect("eta");
    for (n, v) in [1, 2, 4].iter().zip(&back) {
        println!("eta(-{n}T, 0, 0.5) = {:+.12}  closed form {:+.12}", v[0], *n as f64 * sys.period * 0.5);
    }

    let field = averaged_field(&sys, 1.0, 4096, 1e-7, &cfg).expect("averaged field");
    println!("\nPhi converged with n = {} periods; trend {:?}", field.n_used, field.trend);
    for xi in [-0.8, 0.0, 0.5] {
        println!("Phi({xi:+.1}) = {:+.10}  (expected {:+.1})", field.eval(&[xi]).unwrap()[0], -xi);
    }

    let z = solve_averaged(&field, &[0.5], 1.0, &cfg).expect("averaged solution");
    println!("averaged solution z(1) = {:.9} (exp(-1)/2 = {:.9})", z.trajectory.endpoint()[0], 0.5 * (-1.0f64).exp());

    let verdicts = verify_theorem4(&sys, &field, &[0.5], 1.0, &[0.02, 0.01, 0.005], 0.1, &cfg).expect("comparison");
    println!("\n{:>8} {:>14} {:>8}", "eps", "sup error", "ratio");
    let mut prev: Option<f64> = None;
    for v in &verdicts {
        let ratio = prev.map_or(String::from("-"), |p| format!("{:.4}", p / v.sup_error));
        println!("{:8} {:14.6e} {:>8}  pass {}", v.eps, v.sup_error, ratio, v.pass);
        prev = Some(v.sup_error);
    }

    let e1 = registry::e1_circle();
    let sf = to_standard_form(&e1, &cfg);
    let on = sf.eval(0.3, &[1.0, 0.0]).unwrap();
    let off = sf.eval(0.3, &[0.5, 0.0]).unwrap();
    println!("\nstandard form of e1-circle at t = 0.3:");
    println!("  on the cycle  f = {:?}, not periodic: {}", on.f, on.not_periodic);
    println!("  inside        f = {:?}, not periodic: {} (residual {:.3})", off.f, off.not_periodic, off.period_residual);
}
