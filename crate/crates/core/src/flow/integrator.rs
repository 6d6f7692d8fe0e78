//! Adaptive DOP853 integration with continuous extension.
//!
//! The step controller and the combined 5th/3rd-order error norm follow
//! Hairer's DOP853. Every accepted step stores the seven coefficient
//! vectors of the 7th-order interpolant, so a [`Trajectory`] can be
//! evaluated anywhere on its interval.

use super::tableau::{A, B, C, D, E3, E5, STAGES, STAGES_EXT};
use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;
const DENSE_TERMS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0 && self.max_steps > 0)
        {
            return Err(Error::Invalid(format!(
                "integrator settings must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Same settings with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        IntegratorConfig {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..*self
        }
    }
}

/// Dense numerical solution on `[min(t0,t1), max(t0,t1)]`.
///
/// Node times are stored in integration order, so they decrease for a
/// backward run. Immutable once built.
#[derive(Debug, Clone)]
pub struct Trajectory {
    t0: f64,
    t1: f64,
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    dense: Vec<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t0.min(self.t1), self.t0.max(self.t1))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times
            .iter()
            .enumerate()
            .map(move |(i, &t)| (t, self.state(i)))
    }

    pub fn start(&self) -> &[f64] {
        self.state(0)
    }

    pub fn endpoint(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (lo, hi) = self.interval();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { t, lo, hi });
        }
        let forward = self.t1 >= self.t0;
        // first node index whose time is at or beyond t in integration order
        let idx = self.times.partition_point(|&s| if forward { s < t } else { s > t });
        if idx < self.times.len() && self.times[idx] == t {
            out.copy_from_slice(self.state(idx));
            return Ok(());
        }
        let seg = idx - 1;
        let (ta, tb) = (self.times[seg], self.times[seg + 1]);
        let x = (t - ta) / (tb - ta);
        let n = self.dim;
        let coeffs = &self.dense[seg * DENSE_TERMS * n..(seg + 1) * DENSE_TERMS * n];
        let y_old = self.state(seg);
        for c in 0..n {
            let mut y = 0.0;
            for (i, term) in (0..DENSE_TERMS).rev().enumerate() {
                y += coeffs[term * n + c];
                if i % 2 == 0 {
                    y *= x;
                } else {
                    y *= 1.0 - x;
                }
            }
            out[c] = y + y_old[c];
        }
        Ok(())
    }
}

fn rms_sq(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum()
}

struct Stepper<'a, F> {
    field: F,
    cfg: &'a IntegratorConfig,
    dim: usize,
    k: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl<F> Stepper<'_, F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn call(&mut self, t: f64, y: &[f64], out_stage: usize) -> Result<()> {
        let out = &mut self.k[out_stage];
        (self.field)(t, y, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t, x: y.to_vec() });
        }
        Ok(())
    }

    fn eval_into(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.field)(t, y, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t, x: y.to_vec() });
        }
        Ok(())
    }

    fn initial_step(&mut self, t0: f64, y0: &[f64], f0: &[f64], dir: f64, span: f64) -> Result<f64> {
        let n = self.dim as f64;
        let scale: Vec<f64> = y0
            .iter()
            .map(|y| self.cfg.abs_tol + y.abs() * self.cfg.rel_tol)
            .collect();
        let d0 = (rms_sq(y0.iter().zip(&scale).map(|(y, s)| y / s)) / n).sqrt();
        let d1 = (rms_sq(f0.iter().zip(&scale).map(|(f, s)| f / s)) / n).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * dir * f).collect();
        let mut f1 = vec![0.0; self.dim];
        self.eval_into(t0 + h0 * dir, &y1, &mut f1)?;
        let d2 = (rms_sq(f1.iter().zip(f0).zip(&scale).map(|((a, b), s)| (a - b) / s)) / n).sqrt()
            / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        Ok((100.0 * h0).min(h1).min(span).min(self.cfg.max_step))
    }

    /// One RK stage sweep; fills `k[0..=STAGES]` and returns `y_new`.
    fn rk_step(&mut self, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>> {
        let n = self.dim;
        for s in 1..STAGES {
            let mut tmp = std::mem::take(&mut self.scratch);
            for c in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][c];
                }
                tmp[c] = y[c] + h * acc;
            }
            let r = self.call(t + C[s] * h, &tmp, s);
            self.scratch = tmp;
            r?;
        }
        let mut y_new = vec![0.0; n];
        for c in 0..n {
            let mut acc = 0.0;
            for j in 0..STAGES {
                acc += B[j] * self.k[j][c];
            }
            y_new[c] = y[c] + h * acc;
        }
        self.call(t + h, &y_new, STAGES)?;
        Ok(y_new)
    }

    fn error_norm(&self, h: f64, y: &[f64], y_new: &[f64]) -> f64 {
        let n = self.dim;
        let mut e5 = 0.0;
        let mut e3 = 0.0;
        for c in 0..n {
            let scale = self.cfg.abs_tol + y[c].abs().max(y_new[c].abs()) * self.cfg.rel_tol;
            let mut a5 = 0.0;
            let mut a3 = 0.0;
            for j in 0..=STAGES {
                a5 += E5[j] * self.k[j][c];
                a3 += E3[j] * self.k[j][c];
            }
            e5 += (a5 / scale).powi(2);
            e3 += (a3 / scale).powi(2);
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        h.abs() * e5 / ((e5 + 0.01 * e3) * n as f64).sqrt()
    }

    /// Extra stages and the seven interpolation coefficient vectors for the
    /// step just accepted.
    fn dense_coefficients(&mut self, t: f64, y_old: &[f64], y_new: &[f64], h: f64) -> Result<Vec<f64>> {
        let n = self.dim;
        for s in STAGES + 1..STAGES_EXT {
            let mut tmp = std::mem::take(&mut self.scratch);
            for c in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][c];
                }
                tmp[c] = y_old[c] + h * acc;
            }
            let r = self.call(t + C[s] * h, &tmp, s);
            self.scratch = tmp;
            r?;
        }
        let mut out = vec![0.0; DENSE_TERMS * n];
        for c in 0..n {
            let dy = y_new[c] - y_old[c];
            let f_old = self.k[0][c];
            let f_new = self.k[STAGES][c];
            out[c] = dy;
            out[n + c] = h * f_old - dy;
            out[2 * n + c] = 2.0 * dy - h * (f_new + f_old);
            for (r, row) in D.iter().enumerate() {
                let mut acc = 0.0;
                for j in 0..STAGES_EXT {
                    acc += row[j] * self.k[j][c];
                }
                out[(3 + r) * n + c] = h * acc;
            }
        }
        Ok(out)
    }
}

fn run<F>(
    field: F,
    t0: f64,
    t1: f64,
    xi: &[f64],
    cfg: &IntegratorConfig,
    dense: bool,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    cfg.validate()?;
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Invalid(format!("non-finite time interval [{t0}, {t1}]")));
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: t0, x: xi.to_vec() });
    }
    let dim = xi.len();
    let mut traj = Trajectory {
        t0,
        t1,
        dim,
        times: vec![t0],
        states: xi.to_vec(),
        dense: Vec::new(),
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
    };
    if t0 == t1 {
        return Ok(traj);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut st = Stepper {
        field,
        cfg,
        dim,
        k: vec![vec![0.0; dim]; STAGES_EXT],
        scratch: vec![0.0; dim],
    };
    let mut t = t0;
    let mut y = xi.to_vec();
    let mut f = vec![0.0; dim];
    st.eval_into(t, &y, &mut f)?;
    let mut h_abs = st.initial_step(t, &y, &f, dir, span)?;
    let mut accepted = 0usize;

    while dir * (t1 - t) > 0.0 {
        if accepted >= cfg.max_steps {
            return Err(Error::StepLimit {
                t,
                max_steps: cfg.max_steps,
            });
        }
        let min_step = 10.0 * (next_toward(t, dir) - t).abs();
        h_abs = h_abs.min(cfg.max_step).max(min_step);
        let mut rejected = false;
        let (t_new, y_new, h) = loop {
            if h_abs < min_step {
                return Err(Error::StepTooSmall { t });
            }
            let mut t_new = t + dir * h_abs;
            if dir * (t_new - t1) > 0.0 {
                t_new = t1;
            }
            let h = t_new - t;
            st.k[0].copy_from_slice(&f);
            let y_new = st.rk_step(t, &y, h)?;
            let err = st.error_norm(h, &y, &y_new);
            if err < 1.0 {
                let mut factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT))
                };
                if rejected {
                    factor = factor.min(1.0);
                }
                h_abs = h.abs() * factor;
                break (t_new, y_new, h);
            }
            h_abs = h.abs() * MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
            rejected = true;
        };
        if dense {
            let coeffs = st.dense_coefficients(t, &y, &y_new, h)?;
            traj.dense.extend_from_slice(&coeffs);
            traj.times.push(t_new);
            traj.states.extend_from_slice(&y_new);
        }
        f.copy_from_slice(&st.k[STAGES]);
        t = t_new;
        y = y_new;
        accepted += 1;
    }
    if !dense {
        traj.times.push(t);
        traj.states.extend_from_slice(&y);
    }
    Ok(traj)
}

fn next_toward(t: f64, dir: f64) -> f64 {
    let bits = t.to_bits();
    if t == 0.0 {
        return f64::from_bits(1) * dir;
    }
    let up = (dir > 0.0) == (t > 0.0);
    f64::from_bits(if up { bits + 1 } else { bits - 1 })
}

/// Integrates `x' = field(t, x)` from `(t0, xi)` to `t1` (either direction)
/// and returns the dense trajectory.
pub fn integrate<F>(field: F, t0: f64, t1: f64, xi: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    run(field, t0, t1, xi, cfg, true)
}

/// Same step sequence as [`integrate`] but keeps only the endpoint.
pub fn integrate_endpoint<F>(
    field: F,
    t0: f64,
    t1: f64,
    xi: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    Ok(run(field, t0, t1, xi, cfg, false)?.endpoint().to_vec())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{E, PI};

    use super::*;

    fn rotation(_t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = -x[1];
        dx[1] = x[0];
        Ok(())
    }

    #[test]
    fn zero_field_is_constant() {
        let cfg = IntegratorConfig::default();
        let tr = integrate(|_, _, dx: &mut [f64]| {
            dx.fill(0.0);
            Ok(())
        }, 0.0, 5.0, &[1.0, 2.0], &cfg)
        .unwrap();
        assert_eq!(tr.endpoint(), &[1.0, 2.0]);
        assert_eq!(tr.eval(2.5).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn exponential_growth() {
        let cfg = IntegratorConfig::default();
        let end = integrate_endpoint(|_, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[0];
            Ok(())
        }, 0.0, 1.0, &[1.0], &cfg)
        .unwrap();
        assert!(((end[0] - E) / E).abs() <= 1e-9, "{}", end[0]);
    }

    #[test]
    fn rotation_full_turn() {
        let cfg = IntegratorConfig::default();
        let tr = integrate(rotation, 0.0, 2.0 * PI, &[1.0, 0.0], &cfg).unwrap();
        let end = tr.endpoint();
        assert!((end[0] - 1.0).abs() < 1e-8 && end[1].abs() < 1e-8);
        // dense output between nodes
        for i in 0..50 {
            let t = 2.0 * PI * i as f64 / 50.0;
            let x = tr.eval(t).unwrap();
            assert!((x[0] - t.cos()).abs() < 1e-8 && (x[1] - t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn backward_run_covers_interval() {
        let cfg = IntegratorConfig::default();
        let tr = integrate(rotation, 1.0, -3.0, &[1.0f64.cos(), 1.0f64.sin()], &cfg).unwrap();
        assert_eq!(tr.interval(), (-3.0, 1.0));
        assert!(tr.times().windows(2).all(|w| w[1] < w[0]));
        for t in [-3.0, -2.2, 0.0, 0.7, 1.0] {
            let x = tr.eval(t).unwrap();
            assert!((x[0] - f64::cos(t)).abs() < 1e-9, "{t}");
        }
        assert!(tr.eval(1.0 + 1e-12).is_err());
        assert!(tr.eval(-3.1).is_err());
    }

    #[test]
    fn nodes_reproduced_exactly() {
        let cfg = IntegratorConfig::default();
        let tr = integrate(rotation, 0.0, 4.0, &[0.3, -0.2], &cfg).unwrap();
        for (t, x) in tr.nodes() {
            assert_eq!(tr.eval(t).unwrap(), x);
        }
    }

    #[test]
    fn zero_length_interval() {
        let cfg = IntegratorConfig::default();
        let tr = integrate(rotation, 2.0, 2.0, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.eval(2.0).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn blow_up_reports_failure() {
        let cfg = IntegratorConfig {
            max_steps: 10_000,
            ..Default::default()
        };
        let err = integrate(|_, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[0] * x[0];
            Ok(())
        }, 0.0, 2.0, &[1.0], &cfg)
        .unwrap_err();
        assert!(matches!(
            err,
            Error::NonFinite { .. } | Error::StepTooSmall { .. } | Error::StepLimit { .. }
        ), "{err:?}");
    }

    #[test]
    fn non_finite_value_reports_location() {
        let cfg = IntegratorConfig::default();
        let err = integrate(|t, _x: &[f64], dx: &mut [f64]| {
            dx[0] = if t > 0.5 { f64::NAN } else { 1.0 };
            Ok(())
        }, 0.0, 1.0, &[0.0], &cfg)
        .unwrap_err();
        match err {
            Error::NonFinite { t, .. } => assert!(t > 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_limit() {
        let cfg = IntegratorConfig {
            max_steps: 3,
            max_step: 0.01,
            ..Default::default()
        };
        assert!(matches!(
            integrate(rotation, 0.0, 1.0, &[1.0, 0.0], &cfg),
            Err(Error::StepLimit { .. })
        ));
    }

    #[test]
    fn eighth_order_convergence() {
        // Fixed step sizes via max_step with loose tolerances isolate the method order.
        let end = |h: f64| {
            let cfg = IntegratorConfig {
                rel_tol: 1.0,
                abs_tol: 1.0,
                max_step: h,
                ..Default::default()
            };
            integrate_endpoint(rotation, 0.0, 4.0, &[1.0, 0.0], &cfg).unwrap()
        };
        let err = |h: f64| {
            let e = end(h);
            ((e[0] - 4f64.cos()).powi(2) + (e[1] - 4f64.sin()).powi(2)).sqrt()
        };
        let ratio = err(0.5) / err(0.25);
        let order = ratio.log2();
        assert!(order > 7.5 && order < 9.5, "observed order {order}");
    }
}
