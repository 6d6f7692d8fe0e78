//! DOP853 integration of the unperturbed flow `Omega` with dense output.
//!
//! cargo run --example integrate_flow

use perturbed_orbits::{flow_omega, flow_trajectory, registry, IntegratorConfig};

fn main() {
    let sys = registry::e1_circle();
    let cfg = IntegratorConfig::default();
    let tau = sys.period;

    let traj = flow_trajectory(&sys, 0.0, tau, &[0.5, 0.0], &cfg).expect("integrates");
    println!("{} steps on [0, {tau:.6}]", traj.len() - 1);
    for k in 0..=4 {
        let t = tau * k as f64 / 4.0;
        let x = traj.eval(t).unwrap();
        println!("  t = {t:.4}  x = ({:+.9}, {:+.9})  |x| = {:.9}", x[0], x[1], x[0].hypot(x[1]));
    }

    // Omega(t, s, Omega(s, r, xi)) = Omega(t, r, xi)
    let xi = [0.2, 1.4];
    let (r, s, t) = (0.3, 2.1, 5.0);
    let mid = flow_omega(&sys, s, r, &xi, &cfg).unwrap();
    let two_step = flow_omega(&sys, t, s, &mid, &cfg).unwrap();
    let direct = flow_omega(&sys, t, r, &xi, &cfg).unwrap();
    let err = two_step.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("semigroup defect: {err:.3e}");

    let back = flow_omega(&sys, 0.0, t, &flow_omega(&sys, t, 0.0, &xi, &cfg).unwrap(), &cfg).unwrap();
    println!("there and back:   {:.3e}", (back[0] - xi[0]).hypot(back[1] - xi[1]));

    let on_cycle = flow_omega(&sys, tau, 0.0, &[1.0, 0.0], &cfg).unwrap();
    println!("cycle closes to:  {:.3e}", (on_cycle[0] - 1.0).hypot(on_cycle[1]));
}
