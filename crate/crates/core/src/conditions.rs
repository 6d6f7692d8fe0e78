//! Numerical checks of the existence hypotheses: boundary periodicity (A0),
//! the nonvanishing period defect (A1), its rotation number (A2), Floquet
//! simplicity (A3), the weighted Melnikov integral (A3_1), homotopy
//! comparison of two perturbations, and the resonance map `H(a, theta)`.
//!
//! Every check returns a [`HypothesisReport`] with a verdict, a margin and,
//! for failing or inconclusive verdicts, a witness sample.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{parse_in, Scope, Tape};
use crate::flow::{
    flow_omega, integrate_endpoint, GaussLegendre, IntegratorConfig, SystemDef,
    Trajectory, PANELS_PER_PERIOD,
};
use crate::topology::{
    product_degree, winding_number, DegreeReport, PlanarRegion, Point, Region, WindingConfig,
};
use crate::variational::{
    check_cycle, cycle_at, defect_from_anchor, floquet_condition_a3, DefectFamily, FloquetConfig, FloquetReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionId {
    A0,
    A1,
    A2,
    A3,
    A3_1,
    Homotopy,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionId::A0 => "A0",
            ConditionId::A1 => "A1",
            ConditionId::A2 => "A2",
            ConditionId::A3 => "A3",
            ConditionId::A3_1 => "A3_1",
            ConditionId::Homotopy => "homotopy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Holds => 0,
            Verdict::Fails => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Worst-case sample: a phase point, an optional scalar parameter (`s`,
/// `theta` or `lambda`) and the value that decided the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub point: Vec<f64>,
    pub param: Option<f64>,
    pub value: f64,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub id: ConditionId,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Max residual (A0), min defect norm (A1, homotopy), |degree| (A2),
    /// min spectral gap (A3), min |M| (A3_1).
    pub margin: f64,
    pub summary: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl HypothesisReport {
    pub fn verdict_line(&self) -> String {
        format!("{} {} ({})", self.id, self.verdict, self.summary)
    }
}

/// Thresholds shared by the checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// A0 holds when `|Omega(T,0,xi) - xi| <= a0_tol * (1 + |xi|)`.
    pub a0_tol: f64,
    /// A1 holds when the smallest defect norm is at least `a1_tol`.
    pub a1_tol: f64,
    /// Allowed closing residual of a supplied cycle.
    pub cycle_tol: f64,
    /// A3_1 holds when `min |M(theta)|` exceeds this.
    pub melnikov_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            a0_tol: 1e-7,
            a1_tol: 1e-6,
            cycle_tol: 1e-7,
            melnikov_tol: 1e-9,
        }
    }
}

/// `n` uniform points on `[0, T]` including both endpoints (`n >= 2`).
pub fn uniform_grid(period: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| if i == n - 1 { period } else { period * i as f64 / (n - 1) as f64 })
        .collect()
}

fn vnorm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn check_region_dim(sys: &SystemDef, region: &Region) -> Result<()> {
    if sys.dim() != region.dim() {
        return Err(Error::Dimension {
            expected: sys.dim(),
            got: region.dim(),
        });
    }
    Ok(())
}

/// (A0): every boundary point returns to itself after one period of the
/// unperturbed flow.
pub fn check_a0(
    sys: &SystemDef,
    region: &Region,
    n_samples: usize,
    cfg: &IntegratorConfig,
    tol: &Tolerances,
) -> Result<HypothesisReport> {
    check_region_dim(sys, region)?;
    if n_samples < 16 {
        return Err(Error::Invalid(format!("A0 needs at least 16 samples, got {n_samples}")));
    }
    let pts = region.boundary_samples(n_samples);
    let results: Vec<(Vec<f64>, Result<f64>)> = pts
        .into_par_iter()
        .map(|xi| {
            let r = flow_omega(sys, sys.period, 0.0, &xi, cfg).map(|end| {
                vnorm(&end.iter().zip(&xi).map(|(a, b)| a - b).collect::<Vec<_>>())
            });
            (xi, r)
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut worst: Option<(f64, f64, Vec<f64>)> = None;
    for (xi, r) in &results {
        match r {
            Ok(res) => {
                let mut row = xi.clone();
                row.push(*res);
                rows.push(row);
                let ratio = res / (tol.a0_tol * (1.0 + vnorm(xi)));
                if worst.as_ref().is_none_or(|w| ratio > w.0) {
                    worst = Some((ratio, *res, xi.clone()));
                }
            }
            Err(e) => {
                return Ok(HypothesisReport {
                    id: ConditionId::A0,
                    verdict: Verdict::Inconclusive,
                    witness: Some(Witness {
                        point: xi.clone(),
                        param: None,
                        value: f64::NAN,
                        note: e.to_string(),
                    }),
                    margin: f64::NAN,
                    summary: format!("integration failed at {xi:?}: {e}"),
                    columns: Vec::new(),
                    rows: Vec::new(),
                })
            }
        }
    }
    let (ratio, max_res, at) = worst.expect("nonempty boundary");
    let max_residual = rows.iter().map(|r| *r.last().expect("row")).fold(0.0, f64::max);
    let holds = ratio <= 1.0;
    let mut columns: Vec<String> = (1..=sys.dim()).map(|i| format!("x{i}")).collect();
    columns.push("residual".into());
    Ok(HypothesisReport {
        id: ConditionId::A0,
        verdict: if holds { Verdict::Holds } else { Verdict::Fails },
        witness: (!holds).then(|| Witness {
            point: at.clone(),
            param: None,
            value: max_res,
            note: "boundary point not periodic".into(),
        }),
        margin: max_residual,
        summary: format!("max residual {max_residual:.3e}"),
        columns,
        rows,
    })
}

const GOLDEN_STEPS: usize = 40;
/// A sample is refined when its defect norm is at most this multiple of the
/// largest defect change to its neighbours.
const A1_REFINE_FACTOR: f64 = 2.0;

/// Golden-section minimum of `f` on `[lo, hi]`.
fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..GOLDEN_STEPS {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// (A1): `eta(T,s,xi) - eta(0,s,xi)` stays away from zero for `s` in
/// `s_grid` and `xi` on the boundary.
///
/// All anchors come from one run per boundary sample (see
/// [`DefectFamily`]). A sampled local minimum whose norm is within twice the
/// defect change to its neighbours could hide a zero between samples; such
/// minima are refined by golden-section search along the boundary.
/// Rows: `(s, min norm, grid min norm, argmin xi...)`.
pub fn check_a1(
    sys: &SystemDef,
    region: &Region,
    s_grid: &[f64],
    boundary_samples: usize,
    cfg: &IntegratorConfig,
    tol: &Tolerances,
) -> Result<HypothesisReport> {
    check_region_dim(sys, region)?;
    if let Some(s) = s_grid.iter().find(|s| !(0.0..=sys.period).contains(*s)) {
        return Err(Error::Invalid(format!("s = {s} outside [0, {}]", sys.period)));
    }
    let n = boundary_samples.max(4);
    let pts = region.boundary_samples(n);
    // per boundary point: defect vector at every s
    let defects: Vec<Vec<Vec<f64>>> = pts
        .par_iter()
        .map(|xi| {
            let fam = DefectFamily::new(sys, xi, cfg)?;
            s_grid.iter().map(|&s| fam.at(s)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let dist = |a: &[f64], b: &[f64]| vnorm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    let blocks = region.factors().len();
    let mut candidates = Vec::new();
    let mut per_s: Vec<(f64, f64, Vec<f64>)> = Vec::with_capacity(s_grid.len());
    for j in 0..s_grid.len() {
        let at = |b: usize, i: usize| &defects[b * n + (i % n)][j];
        let mut gmin = (f64::INFINITY, 0usize);
        for b in 0..blocks {
            for i in 0..n {
                let v = vnorm(at(b, i));
                if v < gmin.0 {
                    gmin = (v, b * n + i);
                }
                let prev = at(b, i + n - 1);
                let next = at(b, i + 1);
                let is_min = v <= vnorm(prev) && v <= vnorm(next);
                let slope = dist(at(b, i), prev).max(dist(at(b, i), next));
                if is_min && v <= A1_REFINE_FACTOR * slope {
                    candidates.push((j, b, i));
                }
            }
        }
        per_s.push((gmin.0, gmin.0, pts[gmin.1].clone()));
    }
    let refined: Vec<(usize, f64, Vec<f64>)> = candidates
        .par_iter()
        .map(|&(j, b, i)| {
            let s = s_grid[j];
            let point = |u: f64| region.boundary_point(b, u.rem_euclid(1.0));
            let (u, v) = golden_min((i as f64 - 1.0) / n as f64, (i as f64 + 1.0) / n as f64, |u| {
                Ok(vnorm(&DefectFamily::new(sys, &point(u), cfg)?.at(s)?))
            })?;
            Ok((j, v, point(u)))
        })
        .collect::<Result<_>>()?;
    for (j, v, x) in refined {
        if v < per_s[j].0 {
            per_s[j].0 = v;
            per_s[j].2 = x;
        }
    }
    let mut rows = Vec::with_capacity(s_grid.len());
    let mut best = (f64::INFINITY, 0.0, Vec::new());
    for (&s, (m, gmin, x)) in s_grid.iter().zip(per_s) {
        let mut row = vec![s, m, gmin];
        row.extend_from_slice(&x);
        rows.push(row);
        if m < best.0 {
            best = (m, s, x);
        }
    }
    let (min_norm, s_at, x_at) = best;
    let holds = min_norm >= tol.a1_tol;
    let mut columns = vec!["s".to_string(), "min_defect".to_string(), "grid_min_defect".to_string()];
    columns.extend((1..=sys.dim()).map(|i| format!("x{i}")));
    Ok(HypothesisReport {
        id: ConditionId::A1,
        verdict: if holds { Verdict::Holds } else { Verdict::Fails },
        witness: Some(Witness {
            point: x_at,
            param: Some(s_at),
            value: min_norm,
            note: if holds { "smallest period defect".into() } else { "period defect vanishes on the boundary".into() },
        }),
        margin: min_norm,
        summary: format!("min defect {min_norm:.6e} at s = {s_at:.6}"),
        columns,
        rows,
    })
}

/// Largest change of a factor's defect components when the other factors
/// move, over a few probe points; zero for decoupled product systems.
fn coupling_probe(sys: &SystemDef, region: &Region, cfg: &IntegratorConfig) -> Result<f64> {
    let factors = region.factors();
    let mut worst: f64 = 0.0;
    for (i, fi) in factors.iter().enumerate() {
        for u in [0.1, 0.45] {
            let mut base = Vec::new();
            let mut moved = Vec::new();
            for (m, fm) in factors.iter().enumerate() {
                let p = fi.point(u);
                let c = fm.star_center().unwrap_or_else(|| fm.point(0.0));
                if m == i {
                    base.extend_from_slice(&p);
                    moved.extend_from_slice(&p);
                } else {
                    base.extend_from_slice(&c);
                    moved.extend_from_slice(&fm.point(0.3 + u));
                }
            }
            let a = defect_from_anchor(sys, 0.0, &base, cfg)?;
            let b = defect_from_anchor(sys, 0.0, &moved, cfg)?;
            worst = worst.max((a[2 * i] - b[2 * i]).abs().max((a[2 * i + 1] - b[2 * i + 1]).abs()));
        }
    }
    Ok(worst)
}

/// (A2): rotation number of `xi -> eta(T,0,xi)` along the boundary.
///
/// For a product region the system must consist of decoupled planar
/// blocks; factor `i` is evaluated with the other blocks at their star
/// centers and the degree is the product of the factor degrees.
pub fn check_a2(
    sys: &SystemDef,
    region: &Region,
    cfg: &IntegratorConfig,
    wcfg: &WindingConfig,
) -> Result<(HypothesisReport, Option<DegreeReport>)> {
    check_region_dim(sys, region)?;
    let result = match region {
        Region::Planar(r) => winding_number(
            |p: Point| {
                let d = defect_from_anchor(sys, 0.0, &p, cfg)?;
                Ok([d[0], d[1]])
            },
            r,
            wcfg,
        ),
        Region::Product(pr) => {
            let leak = coupling_probe(sys, region, cfg)?;
            if leak > 1e-9 {
                let rep = HypothesisReport {
                    id: ConditionId::A2,
                    verdict: Verdict::Inconclusive,
                    witness: None,
                    margin: f64::NAN,
                    summary: format!("product blocks are coupled (probe difference {leak:.3e})"),
                    columns: Vec::new(),
                    rows: Vec::new(),
                };
                return Ok((rep, None));
            }
            let centers: Vec<Point> = pr
                .factors()
                .iter()
                .map(|f| f.star_center().unwrap_or_else(|| f.point(0.0)))
                .collect();
            let fields: Vec<_> = (0..pr.factors().len())
                .map(|i| {
                    let centers = centers.clone();
                    move |p: Point| -> Result<Point> {
                        let mut x: Vec<f64> = centers.iter().flat_map(|c| *c).collect();
                        x[2 * i] = p[0];
                        x[2 * i + 1] = p[1];
                        let d = defect_from_anchor(sys, 0.0, &x, cfg)?;
                        Ok([d[2 * i], d[2 * i + 1]])
                    }
                })
                .collect();
            product_degree(&fields, pr, wcfg)
        }
    };
    Ok(degree_report(ConditionId::A2, result))
}

fn degree_report(id: ConditionId, result: Result<DegreeReport>) -> (HypothesisReport, Option<DegreeReport>) {
    match result {
        Ok(d) => {
            let holds = d.degree != 0;
            let rep = HypothesisReport {
                id,
                verdict: if holds { Verdict::Holds } else { Verdict::Fails },
                witness: (!holds).then(|| Witness {
                    point: d.min_point.to_vec(),
                    param: None,
                    value: d.min_field_norm,
                    note: "degree zero".into(),
                }),
                margin: d.degree.unsigned_abs() as f64,
                summary: format!(
                    "degree {}, min |F| {:.3e}, {} samples",
                    d.degree, d.min_field_norm, d.samples_used
                ),
                columns: vec!["degree".into(), "min_field_norm".into(), "samples".into()],
                rows: vec![vec![d.degree as f64, d.min_field_norm, d.samples_used as f64]],
            };
            (rep, Some(d))
        }
        Err(Error::FieldVanishes { point, norm }) => (
            HypothesisReport {
                id,
                verdict: Verdict::Inconclusive,
                witness: Some(Witness {
                    point: point.to_vec(),
                    param: None,
                    value: norm,
                    note: "field vanishes on the boundary".into(),
                }),
                margin: norm,
                summary: format!("field vanishes near {point:?} (|F| = {norm:.3e})"),
                columns: Vec::new(),
                rows: Vec::new(),
            },
            None,
        ),
        Err(e) => (
            HypothesisReport {
                id,
                verdict: Verdict::Inconclusive,
                witness: None,
                margin: f64::NAN,
                summary: e.to_string(),
                columns: Vec::new(),
                rows: Vec::new(),
            },
            None,
        ),
    }
}

/// (A3): 1 is a simple multiplier of the linearization along every phase
/// shift of the cycle.
pub fn check_a3(
    sys: &SystemDef,
    cycle: &Trajectory,
    theta_grid: &[f64],
    cfg: &IntegratorConfig,
    fcfg: &FloquetConfig,
) -> Result<(HypothesisReport, FloquetReport)> {
    let rep = floquet_condition_a3(sys, cycle, theta_grid, cfg, fcfg)?;
    let worst = rep
        .phases
        .iter()
        .min_by(|a, b| {
            let ka = (a.simple, a.spectral_gap);
            let kb = (b.simple, b.spectral_gap);
            ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        })
        .expect("nonempty theta grid");
    let max_dist = rep.phases.iter().map(|p| p.distance_to_one).fold(0.0, f64::max);
    let rows = rep
        .phases
        .iter()
        .map(|p| {
            vec![
                p.theta,
                p.closest_to_one.re,
                p.closest_to_one.im,
                p.distance_to_one,
                p.spectral_gap,
                p.liouville_rel_error,
            ]
        })
        .collect();
    let report = HypothesisReport {
        id: ConditionId::A3,
        verdict: if rep.holds { Verdict::Holds } else { Verdict::Fails },
        witness: (!rep.holds).then(|| Witness {
            point: cycle_at(cycle, sys.period, worst.theta).unwrap_or_default(),
            param: Some(worst.theta),
            value: worst.spectral_gap,
            note: if worst.has_one {
                "multiplier 1 is not simple".into()
            } else {
                "no multiplier at 1".into()
            },
        }),
        margin: worst.spectral_gap,
        summary: format!(
            "max |mu* - 1| {max_dist:.3e}, min spectral gap {:.6}",
            worst.spectral_gap
        ),
        columns: ["theta", "mu_re", "mu_im", "dist_to_one", "gap", "liouville_rel_err"]
            .map(String::from)
            .to_vec(),
        rows,
    };
    Ok((report, rep))
}

/// `M(theta)` over a phase grid with diagnostics of the exponential weight.
#[derive(Debug, Clone)]
pub struct MelnikovProfile {
    pub theta_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub min_abs: f64,
    pub weight_min: f64,
    pub weight_max: f64,
}

impl MelnikovProfile {
    /// (A3_1) verdict: `M` keeps away from zero on the grid.
    pub fn report(&self, tol: &Tolerances) -> HypothesisReport {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("nonempty grid");
        let holds = self.min_abs > tol.melnikov_tol;
        HypothesisReport {
            id: ConditionId::A3_1,
            verdict: if holds { Verdict::Holds } else { Verdict::Fails },
            witness: (!holds).then(|| Witness {
                point: Vec::new(),
                param: Some(self.theta_grid[i]),
                value: self.values[i],
                note: "Melnikov integral vanishes".into(),
            }),
            margin: self.min_abs,
            summary: format!(
                "min |M| {:.6e}, weight in [{:.3e}, {:.3e}]",
                self.min_abs, self.weight_min, self.weight_max
            ),
            columns: vec!["theta".into(), "M".into()],
            rows: self
                .theta_grid
                .iter()
                .zip(&self.values)
                .map(|(t, m)| vec![*t, *m])
                .collect(),
        }
    }
}

fn perp(v: &[f64]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// Quadrature nodes on `[0, T]` with the weight `exp(-int_0^t div psi)`
/// along the cycle and the cycle state and velocity at each node.
struct CycleSamples {
    nodes: Vec<(f64, f64)>,
    weight: Vec<f64>,
    x: Vec<Vec<f64>>,
    xdot: Vec<Vec<f64>>,
}

fn cycle_samples(sys: &SystemDef, cycle: &Trajectory) -> Result<CycleSamples> {
    let period = sys.period;
    let gl = GaussLegendre::default();
    let panels = PANELS_PER_PERIOD;
    let h = period / panels as f64;
    let div = |t: f64| -> Result<f64> { sys.psi_div(t, &cycle.eval(t)?) };
    let nodes = gl.composite(0.0, period, panels);
    let per_panel = nodes.len() / panels;
    let mut weight = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    for p in 0..panels {
        let a = p as f64 * h;
        for &(t, _) in &nodes[p * per_panel..(p + 1) * per_panel] {
            let mut partial = 0.0;
            for (u, w) in gl.composite(a, t, 1) {
                partial += w * div(u)?;
            }
            weight.push((-(acc + partial)).exp());
        }
        for (u, w) in gl.composite(a, a + h, 1) {
            acc += w * div(u)?;
        }
    }
    let mut x = Vec::with_capacity(nodes.len());
    let mut xdot = Vec::with_capacity(nodes.len());
    for &(t, _) in &nodes {
        let xt = cycle.eval(t)?;
        xdot.push(sys.psi_at(t, &xt)?);
        x.push(xt);
    }
    Ok(CycleSamples {
        nodes,
        weight,
        x,
        xdot,
    })
}

/// `M(theta) = int_0^T exp(-int_0^t div psi(x0)) <phi(t - theta, x0(t)), x0'(t)^perp> dt`
/// with `perp` the counterclockwise quarter turn and `x0' = psi(t, x0)`.
pub fn melnikov_profile(
    sys: &SystemDef,
    cycle: &Trajectory,
    theta_grid: &[f64],
    tol: &Tolerances,
) -> Result<MelnikovProfile> {
    if sys.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: sys.dim(),
        });
    }
    check_cycle(cycle, sys.period, tol.cycle_tol)?;
    let cs = cycle_samples(sys, cycle)?;
    let values = theta_grid
        .par_iter()
        .map(|&theta| {
            let mut m = 0.0;
            for (j, &(t, w)) in cs.nodes.iter().enumerate() {
                let phi = sys.phi_at(t - theta, &cs.x[j])?;
                let n = perp(&cs.xdot[j]);
                m += w * cs.weight[j] * (phi[0] * n[0] + phi[1] * n[1]);
            }
            Ok(m)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MelnikovProfile {
        theta_grid: theta_grid.to_vec(),
        min_abs: values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min),
        values,
        weight_min: cs.weight.iter().copied().fold(f64::INFINITY, f64::min),
        weight_max: cs.weight.iter().copied().fold(0.0, f64::max),
    })
}

/// `<eta(T,s,x0(theta)) - eta(0,s,x0(theta)), x0'(theta)^perp>` per phase.
pub fn defect_projection(
    sys: &SystemDef,
    cycle: &Trajectory,
    theta_grid: &[f64],
    s: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    theta_grid
        .par_iter()
        .map(|&theta| {
            let x = cycle_at(cycle, sys.period, theta)?;
            let x_s = flow_omega(sys, s, 0.0, &x, cfg)?;
            let d = defect_from_anchor(sys, s, &x_s, cfg)?;
            let n = perp(&sys.psi_at(theta, &x)?);
            Ok(d[0] * n[0] + d[1] * n[1])
        })
        .collect()
}

/// Outcome of comparing the rotation numbers of two perturbations with the
/// same unperturbed part.
#[derive(Debug, Clone)]
pub struct HomotopyReport {
    pub report: HypothesisReport,
    pub degree1: Option<i64>,
    pub degree2: Option<i64>,
    /// Smallest `|lambda d1 + (1 - lambda) d2|` over the lambda grid.
    pub grid_min: f64,
    /// Same minimum over all `lambda` in `[0, 1]` (distance from the origin
    /// to the segment `[d2, d1]`), per boundary sample and `s`.
    pub segment_min: f64,
}

fn segment_min(d1: &[f64], d2: &[f64]) -> (f64, f64) {
    // |d2 + l (d1 - d2)| minimized over l in [0, 1]
    let diff: Vec<f64> = d1.iter().zip(d2).map(|(a, b)| a - b).collect();
    let dd: f64 = diff.iter().map(|v| v * v).sum();
    let l = if dd == 0.0 {
        0.0
    } else {
        (-d2.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>() / dd).clamp(0.0, 1.0)
    };
    let v: Vec<f64> = d2.iter().zip(&diff).map(|(a, b)| a + l * b).collect();
    (vnorm(&v), l)
}

/// Theorem-2 style comparison. The defect of `lambda phi1 + (1 - lambda) phi2`
/// is assembled from the two endpoint defects by affinity.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_compare(
    sys1: &SystemDef,
    sys2: &SystemDef,
    region: &PlanarRegion,
    lambda_grid: &[f64],
    s_grid: &[f64],
    boundary_samples: usize,
    cfg: &IntegratorConfig,
    wcfg: &WindingConfig,
    tol: &Tolerances,
) -> Result<HomotopyReport> {
    if sys1.dim() != 2 || sys2.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: sys1.dim().max(sys2.dim()),
        });
    }
    if sys1.period != sys2.period {
        return Err(Error::Invalid("systems must share the period".into()));
    }
    if let (Some(a), Some(b)) = (sys1.psi.expressions(), sys2.psi.expressions()) {
        if a != b {
            return Err(Error::Invalid("systems must share psi".into()));
        }
    }
    let pts = region.samples(boundary_samples);
    struct Cell {
        grid: (f64, f64),
        seg: (f64, f64),
    }
    let cells: Vec<Vec<Cell>> = pts
        .par_iter()
        .map(|p| {
            let f1 = DefectFamily::new(sys1, p, cfg)?;
            let f2 = DefectFamily::new(sys2, p, cfg)?;
            s_grid
                .iter()
                .map(|&s| {
                    let d1 = f1.at(s)?;
                    let d2 = f2.at(s)?;
                    let grid = lambda_grid
                        .iter()
                        .map(|&l| {
                            let v: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| l * a + (1.0 - l) * b).collect();
                            (vnorm(&v), l)
                        })
                        .min_by(|a, b| a.0.total_cmp(&b.0))
                        .unwrap_or((f64::INFINITY, f64::NAN));
                    Ok(Cell {
                        grid,
                        seg: segment_min(&d1, &d2),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut gmin = (f64::INFINITY, 0.0, 0.0, 0usize);
    let mut smin = (f64::INFINITY, 0.0, 0.0, 0usize);
    for (i, row) in cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if c.grid.0 < gmin.0 {
                gmin = (c.grid.0, c.grid.1, s_grid[j], i);
            }
            if c.seg.0 < smin.0 {
                smin = (c.seg.0, c.seg.1, s_grid[j], i);
            }
        }
    }
    let field = |sys: &SystemDef| {
        let r = winding_number(
            |p: Point| {
                let d = defect_from_anchor(sys, 0.0, &p, cfg)?;
                Ok([d[0], d[1]])
            },
            region,
            wcfg,
        );
        r.ok().map(|d| d.degree)
    };
    let degree1 = field(sys1);
    let degree2 = field(sys2);
    let vanishes = gmin.0 < tol.a1_tol || smin.0 < tol.a1_tol;
    let (verdict, witness, summary) = if vanishes {
        let (v, l, s, i) = if gmin.0 < tol.a1_tol { gmin } else { smin };
        (
            Verdict::Inconclusive,
            Some(Witness {
                point: pts[i].to_vec(),
                param: Some(l),
                value: v,
                note: format!("homotopy vanishes at lambda = {l}, s = {s}"),
            }),
            format!("homotopy vanishes: |defect| = {v:.3e} at lambda = {l:.6}, s = {s:.6}, xi = {:?}", pts[i]),
        )
    } else {
        match (degree1, degree2) {
            (Some(a), Some(b)) if a == b => (
                Verdict::Holds,
                None,
                format!("degrees {a} = {b}, min homotopy defect {:.6e}", gmin.0),
            ),
            (Some(a), Some(b)) => (
                Verdict::Fails,
                Some(Witness {
                    point: Vec::new(),
                    param: None,
                    value: (a - b) as f64,
                    note: "degrees differ".into(),
                }),
                format!("degrees differ: {a} vs {b}"),
            ),
            _ => (Verdict::Inconclusive, None, "degree computation failed".to_string()),
        }
    };
    let columns = ["lambda", "s", "min_defect"].map(String::from).to_vec();
    let rows = vec![vec![gmin.1, gmin.2, gmin.0], vec![smin.1, smin.2, smin.0]];
    Ok(HomotopyReport {
        report: HypothesisReport {
            id: ConditionId::Homotopy,
            verdict,
            witness,
            margin: gmin.0.min(smin.0),
            summary,
            columns,
            rows,
        },
        degree1,
        degree2,
        grid_min: gmin.0,
        segment_min: smin.0,
    })
}

/// `H(a, theta) = int_0^{2 pi} (sin tau, cos tau) f(tau + theta, a cos tau, -a sin tau) d tau`
/// for a forcing `f(t, u, v)` written with `u = x1`, `v = x2`.
pub struct ResonanceMap {
    tape: Tape,
    nodes: Vec<(f64, f64)>,
    source: String,
}

/// Zero of `H` with the central-difference Jacobian determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceZero {
    pub a: f64,
    pub theta: f64,
    pub det: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ResonanceReport {
    pub zeros: Vec<ResonanceZero>,
    pub seeds: usize,
    pub discarded: usize,
    /// `true` when `H` vanished identically on the seed grid.
    pub degenerate: bool,
}

impl ResonanceMap {
    pub fn new(forcing: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let scope = Scope::new(2, params.keys().cloned());
        let e = parse_in(forcing, &scope)?;
        let tape = Tape::compile(&e, params)?;
        Ok(ResonanceMap {
            tape,
            nodes: GaussLegendre::default().composite(0.0, TAU, PANELS_PER_PERIOD),
            source: forcing.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, a: f64, theta: f64) -> Result<[f64; 2]> {
        let mut h = [0.0; 2];
        for &(tau, w) in &self.nodes {
            let (s, c) = tau.sin_cos();
            let f = self.tape.eval(tau + theta, &[a * c, -a * s])?;
            h[0] += w * s * f;
            h[1] += w * c * f;
        }
        Ok(h)
    }

    /// Central-difference Jacobian, step `1e-5 (1 + |a|)` in both variables.
    pub fn jacobian(&self, a: f64, theta: f64) -> Result<[[f64; 2]; 2]> {
        let h = 1e-5 * (1.0 + a.abs());
        let da = (self.eval(a + h, theta)?, self.eval(a - h, theta)?);
        let dt = (self.eval(a, theta + h)?, self.eval(a, theta - h)?);
        let c = |p: [f64; 2], m: [f64; 2], i: usize| (p[i] - m[i]) / (2.0 * h);
        Ok([[c(da.0, da.1, 0), c(dt.0, dt.1, 0)], [c(da.0, da.1, 1), c(dt.0, dt.1, 1)]])
    }

    fn newton(&self, a0: f64, t0: f64) -> Option<(f64, f64, f64)> {
        let (mut a, mut t) = (a0, t0);
        let mut h = self.eval(a, t).ok()?;
        let mut r = h[0].hypot(h[1]);
        for _ in 0..50 {
            if r < 1e-13 {
                break;
            }
            let j = self.jacobian(a, t).ok()?;
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let da = (j[1][1] * h[0] - j[0][1] * h[1]) / det;
            let dt = (-j[1][0] * h[0] + j[0][0] * h[1]) / det;
            let mut step = 1.0;
            loop {
                let (na, nt) = (a - step * da, t - step * dt);
                if let Ok(nh) = self.eval(na, nt) {
                    let nr = nh[0].hypot(nh[1]);
                    if nr < r {
                        a = na;
                        t = nt;
                        h = nh;
                        r = nr;
                        break;
                    }
                }
                step *= 0.5;
                if step < 1e-6 {
                    return (r < 1e-10).then_some((a, t, r));
                }
            }
        }
        (r < 1e-10).then_some((a, t, r))
    }

    /// Damped Newton from every seed of a uniform grid; zeros outside the
    /// box are discarded, phases are reported modulo `2 pi` and duplicates
    /// merged.
    pub fn find_zeros(&self, a_range: (f64, f64), theta_range: (f64, f64), grid: (usize, usize)) -> Result<ResonanceReport> {
        let (na, nt) = (grid.0.max(1), grid.1.max(1));
        let seeds: Vec<(f64, f64)> = (0..na)
            .flat_map(|i| {
                (0..nt).map(move |j| {
                    let a = a_range.0 + (a_range.1 - a_range.0) * (i as f64 + 0.5) / na as f64;
                    let t = theta_range.0 + (theta_range.1 - theta_range.0) * (j as f64 + 0.5) / nt as f64;
                    (a, t)
                })
            })
            .collect();
        let mut scale: f64 = 0.0;
        for &(a, t) in &seeds {
            let h = self.eval(a, t)?;
            scale = scale.max(h[0].hypot(h[1]));
        }
        if scale < 1e-12 {
            return Ok(ResonanceReport {
                zeros: Vec::new(),
                seeds: seeds.len(),
                discarded: seeds.len(),
                degenerate: true,
            });
        }
        let found: Vec<Option<(f64, f64, f64)>> = seeds.par_iter().map(|&(a, t)| self.newton(a, t)).collect();
        let mut zeros: Vec<ResonanceZero> = Vec::new();
        let mut discarded = 0;
        let span = theta_range.1 - theta_range.0;
        for f in found {
            let Some((a, t, r)) = f else {
                discarded += 1;
                continue;
            };
            let mut t = t;
            if span >= TAU - 1e-12 {
                t = theta_range.0 + (t - theta_range.0).rem_euclid(TAU);
            }
            let inside = a >= a_range.0 && a <= a_range.1 && t >= theta_range.0 - 1e-9 && t <= theta_range.1 + 1e-9;
            if !inside {
                discarded += 1;
                continue;
            }
            let dup = zeros.iter().any(|z| {
                let dt = (z.theta - t).abs();
                (z.a - a).abs() < 1e-6 && (dt < 1e-6 || (TAU - dt).abs() < 1e-6)
            });
            if !dup {
                let j = self.jacobian(a, t)?;
                zeros.push(ResonanceZero {
                    a,
                    theta: t,
                    det: j[0][0] * j[1][1] - j[0][1] * j[1][0],
                    residual: r,
                });
            }
        }
        zeros.sort_by(|x, y| x.a.total_cmp(&y.a).then(x.theta.total_cmp(&y.theta)));
        Ok(ResonanceReport {
            zeros,
            seeds: seeds.len(),
            discarded,
            degenerate: false,
        })
    }

    /// Winding number of `H` on the box `[a0 - r, a0 + r] x [t0 - r, t0 + r]`.
    pub fn box_degree(&self, a0: f64, theta0: f64, half: f64, wcfg: &WindingConfig) -> Result<DegreeReport> {
        let region = box_region(a0, theta0, half)?;
        winding_number(|p: Point| self.eval(p[0], p[1]), &region, wcfg)
    }
}

/// Counterclockwise square `[c0 - r, c0 + r] x [c1 - r, c1 + r]`.
pub fn box_region(c0: f64, c1: f64, half: f64) -> Result<PlanarRegion> {
    PlanarRegion::polygon(
        vec![
            [c0 - half, c1 - half],
            [c0 + half, c1 - half],
            [c0 + half, c1 + half],
            [c0 - half, c1 + half],
        ],
        Some([c0, c1]),
    )
}

/// The resonance coordinates `xi(a, theta) = (-a cos theta, a sin theta)`.
pub fn resonance_coords(a: f64, theta: f64) -> Point {
    [-a * theta.cos(), a * theta.sin()]
}

/// Image of the box under [`resonance_coords`], traversed so that the image
/// is counterclockwise (the map reverses orientation).
pub fn resonance_image_region(a0: f64, theta0: f64, half: f64, resolution: usize) -> Result<PlanarRegion> {
    let bx = box_region(a0, theta0, half)?;
    let curve = move |u: f64| {
        let p = bx.point(1.0 - u);
        resonance_coords(p[0], p[1])
    };
    PlanarRegion::parametric(std::sync::Arc::new(curve), Some(resonance_coords(a0, theta0)), resolution)
}

/// Real root of `a^3 - 4a - 4` by bisection; the amplitude of the forced
/// van der Pol resonance.
pub fn cubic_amplitude_root() -> f64 {
    let f = |a: f64| a * a * a - 4.0 * a - 4.0;
    let (mut lo, mut hi) = (2.0, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Time-averaged field `(1/T) int_0^T phi(t, xi) dt` by composite quadrature.
pub fn time_average(sys: &SystemDef, xi: &[f64]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; sys.dim()];
    for (t, w) in GaussLegendre::default().composite(0.0, sys.period, PANELS_PER_PERIOD) {
        for (a, v) in acc.iter_mut().zip(sys.phi_at(t, xi)?) {
            *a += w * v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= sys.period);
    Ok(acc)
}

/// `Omega(T, 0, xi) - xi`, the unperturbed period map residual.
pub fn period_residual(sys: &SystemDef, xi: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let end = integrate_endpoint(sys.psi_rhs(), 0.0, sys.period, xi, cfg)?;
    Ok(end.iter().zip(xi).map(|(a, b)| a - b).collect())
}
