//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use perturbed_orbits::expr::{differentiate, parse, Expr, Variable};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Random smooth expression text over `t, x1, x2, a`; arguments of `log`,
/// `sqrt` and `/` are kept away from their singular sets.
pub fn smooth_source(rng: &mut ChaCha8Rng, depth: usize) -> String {
    let leaves = ["t", "x1", "x2", "a", "0.5", "2", "1.25"];
    if depth == 0 || rng.random::<f64>() < 0.25 {
        return leaves[rng.random_range(0..leaves.len())].to_string();
    }
    let mut sub = || smooth_source(rng, depth - 1);
    let (u, v) = (sub(), sub());
    match rng.random_range(0..12) {
        0 => format!("({u}) + ({v})"),
        1 => format!("({u}) - ({v})"),
        2 | 3 => format!("({u})*({v})"),
        4 => format!("({u})/(1.5 + sin({v}))"),
        5 => format!("({u})^2"),
        6 => format!("({u})^3"),
        7 => format!("sin({u})"),
        8 => format!("cos({u})"),
        9 => format!("exp(0.5*sin({u}))"),
        10 => format!("log(2 + cos({u}))"),
        _ => format!("sqrt(1 + ({u})^2) - tan(0.3*sin({v}))"),
    }
}

/// Symbolic derivatives against Richardson-extrapolated central differences
/// at `n` seeded (expression, variable, point) samples. Returns the worst
/// error relative to `1 + |e(p)| + |d(p)|`, or a description of the first
/// sample beyond `1e-6`.
pub fn derivative_check(n: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = [Variable::Time, Variable::State(0), Variable::State(1), Variable::Param("a".into())];
    let mut worst: f64 = 0.0;
    for sample in 0..n {
        let src = smooth_source(&mut rng, 4);
        let e = parse(&src).map_err(|err| format!("{src}: {err}"))?;
        let idx = rng.random_range(0..vars.len());
        let d = differentiate(&e, &vars[idx]);
        let p: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
        let eval = |e: &Expr, q: [f64; 4]| {
            let params: BTreeMap<String, f64> = [("a".to_string(), q[3])].into();
            e.eval(q[0], &q[1..3], &params).expect("smooth expression evaluates")
        };
        let slot = [0, 1, 2, 3][idx];
        let central = |h: f64| {
            let (mut hi, mut lo) = (p, p);
            hi[slot] += h;
            lo[slot] -= h;
            (eval(&e, hi) - eval(&e, lo)) / (2.0 * h)
        };
        let h = 1e-3 * (1.0 + p[slot].abs());
        // One Richardson step removes the h^2 term of the central difference.
        let fd = (4.0 * central(0.5 * h) - central(h)) / 3.0;
        let exact = eval(&d, p);
        let err = (exact - fd).abs() / (1.0 + eval(&e, p).abs() + exact.abs());
        worst = worst.max(err);
        if err > 1e-6 {
            return Err(format!("sample {sample}: d/d{:?} of {src} at {p:?}: {exact} vs {fd}", vars[idx]));
        }
    }
    Ok(worst)
}
