//! Composite Gauss–Legendre quadrature.

use std::f64::consts::PI;

/// Default points per panel.
pub const PANEL_POINTS: usize = 8;
/// Default number of panels per period.
pub const PANELS_PER_PERIOD: usize = 64;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on `[-1, 1]`, nodes from Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature nodes and weights of the composite rule with `panels`
    /// equal panels on `[a, b]`, in increasing panel order.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let width = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let lo = a + width * p as f64;
            let mid = lo + 0.5 * width;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + 0.5 * width * x, 0.5 * width * w));
            }
        }
        out
    }

    pub fn integrate(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.composite(a, b, panels)
            .into_iter()
            .map(|(t, w)| w * f(t))
            .sum()
    }
}

impl Default for GaussLegendre {
    fn default() -> Self {
        GaussLegendre::new(PANEL_POINTS)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_degree_2n_minus_1() {
        let gl = GaussLegendre::new(8);
        let w: f64 = gl.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        // x^14 on [-1,1] integrates to 2/15
        let v = gl.integrate(-1.0, 1.0, 1, |x| x.powi(14));
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let v = gl.integrate(0.0, 1.0, 1, |x| x.powi(15));
        assert!((v - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn composite_exponential() {
        let gl = GaussLegendre::default();
        let v = gl.integrate(0.0, 2.0 * PI, PANELS_PER_PERIOD, |t| (2.0 * t).exp() * t.cos());
        let exact = ((4.0 * PI).exp() - 1.0) * 2.0 / 5.0;
        assert!(((v - exact) / exact).abs() < 1e-13, "{v} {exact}");
    }

    #[test]
    fn odd_point_rule() {
        let gl = GaussLegendre::new(5);
        assert!(gl.nodes()[2].abs() < 1e-15);
        let v = gl.integrate(0.0, 1.0, 3, |x| x.powi(9));
        assert!((v - 0.1).abs() < 1e-14);
    }
}
