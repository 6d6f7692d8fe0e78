//! Planar Jordan regions, winding numbers of planar fields along their
//! boundaries, radial contractions `W_delta`, and products of planar regions.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// A closed curve `c(u)`, `u` in `[0, 1)`, traversed counterclockwise.
pub type CurveFn = Arc<dyn Fn(f64) -> Point + Send + Sync>;

#[derive(Clone)]
pub enum Boundary {
    Circle { center: Point, radius: f64 },
    Parametric(CurveFn),
    /// Counterclockwise vertex list, parametrized by arc length.
    Polygon(Vec<Point>),
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Circle { center, radius } => write!(f, "Circle({center:?}, {radius})"),
            Boundary::Parametric(_) => write!(f, "Parametric(..)"),
            Boundary::Polygon(v) => write!(f, "Polygon({} vertices)", v.len()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanarRegion {
    boundary: Boundary,
    star_center: Option<Point>,
    /// Sample count used for validation, membership and default boundary grids.
    resolution: usize,
    /// Cumulative arc length at each polygon vertex, normalized to end at 1.
    arc: Vec<f64>,
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

fn shoelace(pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| cross(pts[i], pts[(i + 1) % n])).sum::<f64>() / 2.0
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(sub(q2, q1), sub(p1, q1));
    let d2 = cross(sub(q2, q1), sub(p2, q1));
    let d3 = cross(sub(p2, p1), sub(q1, p1));
    let d4 = cross(sub(p2, p1), sub(q2, p1));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    };
    norm(sub(p, [a[0] + s * ab[0], a[1] + s * ab[1]]))
}

fn validate_closed_curve(pts: &[Point]) -> Result<()> {
    if pts.len() < 3 {
        return Err(Error::InvalidRegion("boundary needs at least 3 points".into()));
    }
    if pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidRegion("non-finite boundary point".into()));
    }
    let area = shoelace(pts);
    if area <= 0.0 {
        return Err(Error::InvalidRegion(format!(
            "boundary must be counterclockwise (signed area {area})"
        )));
    }
    let n = pts.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return Err(Error::InvalidRegion(format!(
                    "boundary self-intersects between segments {i} and {j}"
                )));
            }
        }
    }
    Ok(())
}

pub const DEFAULT_RESOLUTION: usize = 256;

impl PlanarRegion {
    /// Disk with the given center and radius; the center is the star center.
    pub fn circle(center: Point, radius: f64, resolution: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidRegion(format!("radius must be positive, got {radius}")));
        }
        if resolution < 3 {
            return Err(Error::InvalidRegion("resolution must be at least 3".into()));
        }
        Ok(PlanarRegion {
            boundary: Boundary::Circle { center, radius },
            star_center: Some(center),
            resolution,
            arc: Vec::new(),
        })
    }

    pub fn unit_disk() -> Self {
        Self::circle([0.0, 0.0], 1.0, DEFAULT_RESOLUTION).expect("valid disk")
    }

    pub fn polygon(vertices: Vec<Point>, star_center: Option<Point>) -> Result<Self> {
        validate_closed_curve(&vertices)?;
        let n = vertices.len();
        let mut arc = Vec::with_capacity(n + 1);
        arc.push(0.0);
        for i in 0..n {
            let l = arc[i] + norm(sub(vertices[(i + 1) % n], vertices[i]));
            arc.push(l);
        }
        let total = arc[n];
        if total <= 0.0 {
            return Err(Error::InvalidRegion("degenerate polygon".into()));
        }
        arc.iter_mut().for_each(|a| *a /= total);
        let region = PlanarRegion {
            boundary: Boundary::Polygon(vertices),
            star_center,
            resolution: n.max(DEFAULT_RESOLUTION),
            arc,
        };
        region.check_star()?;
        Ok(region)
    }

    pub fn parametric(curve: CurveFn, star_center: Option<Point>, resolution: usize) -> Result<Self> {
        let region = PlanarRegion {
            boundary: Boundary::Parametric(curve),
            star_center,
            resolution,
            arc: Vec::new(),
        };
        validate_closed_curve(&region.polyline(resolution))?;
        region.check_star()?;
        Ok(region)
    }

    /// Every ray from the star center meets the sampled boundary once: the
    /// polar angle increases monotonically along the boundary.
    fn check_star(&self) -> Result<()> {
        let Some(c) = self.star_center else {
            return Ok(());
        };
        let pts = self.polyline(self.resolution);
        let n = pts.len();
        for i in 0..n {
            let a = sub(pts[i], c);
            let b = sub(pts[(i + 1) % n], c);
            if cross(a, b) <= 0.0 {
                return Err(Error::InvalidRegion(format!(
                    "region is not star-shaped about {c:?} (near {:?})",
                    pts[i]
                )));
            }
        }
        Ok(())
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn star_center(&self) -> Option<Point> {
        self.star_center
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution.max(3);
        self
    }

    /// Boundary point at parameter `u` (taken modulo 1).
    pub fn point(&self, u: f64) -> Point {
        let u = u.rem_euclid(1.0);
        match &self.boundary {
            Boundary::Circle { center, radius } => {
                let a = TAU * u;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
            Boundary::Parametric(c) => c(u),
            Boundary::Polygon(v) => {
                let i = self.arc.partition_point(|&a| a <= u).saturating_sub(1).min(v.len() - 1);
                let span = self.arc[i + 1] - self.arc[i];
                let s = if span > 0.0 { (u - self.arc[i]) / span } else { 0.0 };
                let a = v[i];
                let b = v[(i + 1) % v.len()];
                [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
            }
        }
    }

    /// `n` boundary points at `u = i/n`.
    pub fn samples(&self, n: usize) -> Vec<Point> {
        (0..n).map(|i| self.point(i as f64 / n as f64)).collect()
    }

    /// Closed polyline used for membership and distance queries.
    fn polyline(&self, n: usize) -> Vec<Point> {
        match &self.boundary {
            Boundary::Polygon(v) => v.clone(),
            _ => self.samples(n),
        }
    }

    pub fn area(&self) -> f64 {
        match &self.boundary {
            Boundary::Circle { radius, .. } => PI * radius * radius,
            _ => shoelace(&self.polyline(self.resolution)),
        }
    }

    /// Winding number of the boundary around `p` (0 outside, 1 inside).
    pub fn boundary_winding(&self, p: Point) -> i64 {
        match &self.boundary {
            Boundary::Circle { center, radius } => i64::from(norm(sub(p, *center)) < *radius),
            _ => {
                let pts = self.polyline(self.resolution);
                let rel: Vec<Point> = pts.iter().map(|q| sub(*q, p)).collect();
                (raw_angle_sum(&rel) / TAU).round() as i64
            }
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.boundary_winding(p) == 1
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        match &self.boundary {
            Boundary::Circle { center, radius } => (norm(sub(p, *center)) - radius).abs(),
            _ => {
                let pts = self.polyline(self.resolution);
                let n = pts.len();
                (0..n)
                    .map(|i| point_segment_distance(p, pts[i], pts[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// `W_delta(U)`: radial scaling by `1 - delta` about the star center.
    /// Negative `delta` expands the region.
    pub fn contract(&self, delta: f64) -> Result<Self> {
        if !(delta > -1.0 && delta < 1.0) {
            return Err(Error::InvalidRegion(format!("delta must lie in (-1, 1), got {delta}")));
        }
        let c = self.star_center.ok_or(Error::MissingStarCenter)?;
        let k = 1.0 - delta;
        let map = move |p: Point| [c[0] + k * (p[0] - c[0]), c[1] + k * (p[1] - c[1])];
        let boundary = match &self.boundary {
            Boundary::Circle { center, radius } => Boundary::Circle {
                center: map(*center),
                radius: radius * k,
            },
            Boundary::Polygon(v) => Boundary::Polygon(v.iter().map(|p| map(*p)).collect()),
            Boundary::Parametric(f) => {
                let f = f.clone();
                Boundary::Parametric(Arc::new(move |u| map(f(u))))
            }
        };
        Ok(PlanarRegion {
            boundary,
            star_center: self.star_center,
            resolution: self.resolution,
            arc: self.arc.clone(),
        })
    }
}

/// Cartesian product of planar regions; dimension `2p`.
#[derive(Debug, Clone)]
pub struct ProductRegion {
    factors: Vec<PlanarRegion>,
}

impl ProductRegion {
    pub fn new(factors: Vec<PlanarRegion>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidRegion("product needs at least one factor".into()));
        }
        Ok(ProductRegion { factors })
    }

    pub fn factors(&self) -> &[PlanarRegion] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        2 * self.factors.len()
    }
}

/// Either a planar region or a product of planar regions.
#[derive(Debug, Clone)]
pub enum Region {
    Planar(PlanarRegion),
    Product(ProductRegion),
}

impl From<PlanarRegion> for Region {
    fn from(r: PlanarRegion) -> Self {
        Region::Planar(r)
    }
}

impl From<ProductRegion> for Region {
    fn from(r: ProductRegion) -> Self {
        Region::Product(r)
    }
}

impl Region {
    pub fn factors(&self) -> &[PlanarRegion] {
        match self {
            Region::Planar(r) => std::slice::from_ref(r),
            Region::Product(p) => p.factors(),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.factors().len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .factors()
                .iter()
                .enumerate()
                .all(|(i, f)| f.contains([x[2 * i], x[2 * i + 1]]))
    }

    /// Distance to the boundary of the product: the smallest factor distance.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.factors()
            .iter()
            .enumerate()
            .map(|(i, f)| f.boundary_distance([x[2 * i], x[2 * i + 1]]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Points on the boundary. For a product, factor `i` runs over its
    /// boundary while every other factor is held at its star center (or its
    /// boundary point at the same parameter when it has none).
    pub fn boundary_samples(&self, n: usize) -> Vec<Vec<f64>> {
        (0..self.factors().len())
            .flat_map(|i| (0..n).map(move |j| (i, j as f64 / n as f64)))
            .map(|(i, u)| self.boundary_point(i, u))
            .collect()
    }

    /// Point of the boundary piece where factor `factor` is at parameter
    /// `u` and the other factors sit at their star centers. Sample `j` of
    /// block `factor` in [`Region::boundary_samples`] is `u = j / n`.
    pub fn boundary_point(&self, factor: usize, u: f64) -> Vec<f64> {
        let factors = self.factors();
        let mut x = Vec::with_capacity(self.dim());
        for (m, fm) in factors.iter().enumerate() {
            let p = if m == factor {
                fm.point(u)
            } else {
                fm.star_center().unwrap_or_else(|| fm.point(u))
            };
            x.extend_from_slice(&p);
        }
        x
    }
}

/// Outcome of a winding-number computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeReport {
    pub degree: i64,
    pub min_field_norm: f64,
    /// Boundary point where the field norm is smallest.
    pub min_point: Point,
    pub samples_used: usize,
    pub refined: bool,
    /// Accumulated argument in radians.
    pub total_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingConfig {
    pub initial_samples: usize,
    pub vanish_tol: f64,
    pub max_samples: usize,
    pub residue_tol: f64,
}

impl Default for WindingConfig {
    fn default() -> Self {
        WindingConfig {
            initial_samples: 512,
            vanish_tol: 1e-9,
            max_samples: 1 << 20,
            residue_tol: 0.1,
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

fn increments(values: &[Point]) -> impl Iterator<Item = f64> + '_ {
    let n = values.len();
    (0..n).map(move |i| {
        let a = values[i];
        let b = values[(i + 1) % n];
        wrap_angle(b[1].atan2(b[0]) - a[1].atan2(a[0]))
    })
}

/// Sum of wrapped argument increments around the closed sequence `values`.
pub fn raw_angle_sum(values: &[Point]) -> f64 {
    increments(values).sum()
}

/// Degree of `field` on `region`: the accumulated argument of the field along
/// the counterclockwise boundary divided by `2 pi`. Starting from a uniform
/// grid, every interval whose argument increment is at least `pi / 2` is
/// bisected until none is left; a sample with norm below `vanish_tol`
/// reports the field vanishing on the boundary.
pub fn winding_number<F>(field: F, region: &PlanarRegion, cfg: &WindingConfig) -> Result<DegreeReport>
where
    F: Fn(Point) -> Result<Point> + Sync,
{
    let n = cfg.initial_samples.max(4);
    let eval = |u: f64| -> Result<(f64, Point, Point)> {
        let p = region.point(u);
        let v = field(p)?;
        if !v[0].is_finite() || !v[1].is_finite() {
            return Err(Error::NonFinite { t: u, x: vec![p[0], p[1]] });
        }
        Ok((u, p, v))
    };
    let mut values: Vec<(f64, Point, Point)> = (0..n)
        .into_par_iter()
        .map(|i| eval(i as f64 / n as f64))
        .collect::<Result<_>>()?;
    let mut refined = false;
    loop {
        let (min_i, min_norm) = values
            .iter()
            .enumerate()
            .map(|(i, (_, _, v))| (i, norm(*v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if min_norm < cfg.vanish_tol {
            return Err(Error::FieldVanishes {
                point: values[min_i].1,
                norm: min_norm,
            });
        }
        let vecs: Vec<Point> = values.iter().map(|(_, _, v)| *v).collect();
        let bad: Vec<usize> = increments(&vecs)
            .enumerate()
            .filter(|(_, d)| d.abs() >= PI / 2.0)
            .map(|(i, _)| i)
            .collect();
        let total = raw_angle_sum(&vecs);
        let degree = (total / TAU).round();
        if bad.is_empty() && (total - degree * TAU).abs() <= cfg.residue_tol {
            return Ok(DegreeReport {
                degree: degree as i64,
                min_field_norm: min_norm,
                min_point: values[min_i].1,
                samples_used: values.len(),
                refined,
                total_angle: total,
            });
        }
        let len = values.len();
        if bad.is_empty() || len + bad.len() > cfg.max_samples {
            return Err(Error::NonConvergent { samples: len });
        }
        // bisect only the intervals whose argument jumps too far
        let mids: Vec<f64> = bad
            .iter()
            .map(|&i| {
                let u0 = values[i].0;
                let u1 = if i + 1 == len { 1.0 } else { values[i + 1].0 };
                0.5 * (u0 + u1)
            })
            .collect();
        if bad.iter().zip(&mids).any(|(&i, &m)| m <= values[i].0) {
            return Err(Error::NonConvergent { samples: len });
        }
        let fresh: Vec<(f64, Point, Point)> = mids.into_par_iter().map(eval).collect::<Result<_>>()?;
        let mut merged = Vec::with_capacity(len + fresh.len());
        let mut fresh = fresh.into_iter().peekable();
        let mut bad = bad.into_iter().peekable();
        for (i, v) in values.into_iter().enumerate() {
            merged.push(v);
            if bad.peek() == Some(&i) {
                bad.next();
                merged.push(fresh.next().expect("one midpoint per bad interval"));
            }
        }
        values = merged;
        refined = true;
    }
}

/// Degree of a product map: the product of the planar factor degrees.
pub fn product_degree<F>(fields: &[F], region: &ProductRegion, cfg: &WindingConfig) -> Result<DegreeReport>
where
    F: Fn(Point) -> Result<Point> + Sync,
{
    if fields.len() != region.factors().len() {
        return Err(Error::Dimension {
            expected: region.factors().len(),
            got: fields.len(),
        });
    }
    let mut acc: Option<DegreeReport> = None;
    for (f, r) in fields.iter().zip(region.factors()) {
        let rep = winding_number(f, r, cfg)?;
        acc = Some(match acc {
            None => rep,
            Some(a) => DegreeReport {
                degree: a.degree * rep.degree,
                min_field_norm: a.min_field_norm.min(rep.min_field_norm),
                min_point: if rep.min_field_norm < a.min_field_norm {
                    rep.min_point
                } else {
                    a.min_point
                },
                samples_used: a.samples_used + rep.samples_used,
                refined: a.refined || rep.refined,
                total_angle: a.total_angle + rep.total_angle,
            },
        });
    }
    Ok(acc.expect("at least one factor"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> WindingConfig {
        WindingConfig::default()
    }

    #[test]
    fn identity_constant_and_square() {
        let d = PlanarRegion::unit_disk();
        assert_eq!(winding_number(|p| Ok(p), &d, &cfg()).unwrap().degree, 1);
        assert_eq!(winding_number(|_| Ok([1.0, 0.0]), &d, &cfg()).unwrap().degree, 0);
        let sq = |p: Point| Ok([p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]]);
        assert_eq!(winding_number(sq, &d, &cfg()).unwrap().degree, 2);
        let neg = |p: Point| Ok([-p[0], -p[1]]);
        assert_eq!(winding_number(neg, &d, &cfg()).unwrap().degree, 1);
        let conj = |p: Point| Ok([p[0], -p[1]]);
        assert_eq!(winding_number(conj, &d, &cfg()).unwrap().degree, -1);
    }

    #[test]
    fn refinement_kicks_in_for_high_winding() {
        let d = PlanarRegion::unit_disk();
        let c = WindingConfig {
            initial_samples: 16,
            ..cfg()
        };
        let f = |p: Point| {
            let a = 7.0 * p[1].atan2(p[0]);
            Ok([a.cos(), a.sin()])
        };
        let r = winding_number(f, &d, &c).unwrap();
        assert_eq!(r.degree, 7);
        assert!(r.refined && r.samples_used >= 32);
    }

    #[test]
    fn vanishing_and_cap() {
        let d = PlanarRegion::unit_disk();
        let f = |p: Point| Ok([p[0] - 1.0, p[1]]);
        assert!(matches!(winding_number(f, &d, &cfg()), Err(Error::FieldVanishes { .. })));
        let c = WindingConfig {
            initial_samples: 128,
            max_samples: 128,
            ..cfg()
        };
        let g = |p: Point| {
            let a = 50.0 * p[1].atan2(p[0]);
            Ok([a.cos(), a.sin()])
        };
        assert!(matches!(winding_number(g, &d, &c), Err(Error::NonConvergent { .. })));
    }

    #[test]
    fn polygon_matches_circle() {
        let n = 64;
        let verts: Vec<Point> = (0..n)
            .map(|i| {
                let a = TAU * i as f64 / n as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        let poly = PlanarRegion::polygon(verts, Some([0.0, 0.0])).unwrap();
        let sq = |p: Point| Ok([p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]]);
        assert_eq!(winding_number(sq, &poly, &cfg()).unwrap().degree, 2);
        assert!(poly.contains([0.2, 0.1]) && !poly.contains([1.2, 0.0]));
        assert!((poly.area() - PI).abs() < 0.01);
    }

    #[test]
    fn polygon_validation() {
        let cw = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert!(PlanarRegion::polygon(cw, None).is_err());
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(PlanarRegion::polygon(bow, None).is_err());
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let r = PlanarRegion::polygon(sq.clone(), Some([0.5, 0.5])).unwrap();
        assert_eq!(r.point(0.125), [0.5, 0.0]);
        assert!((r.boundary_distance([0.5, 0.4]) - 0.4).abs() < 1e-15);
        assert!(PlanarRegion::polygon(sq, Some([2.0, 0.5])).is_err());
    }

    #[test]
    fn contraction() {
        let d = PlanarRegion::unit_disk();
        let half = d.contract(0.5).unwrap();
        assert!((norm(half.point(0.3)) - 0.5).abs() < 1e-15);
        let big = d.contract(-0.1).unwrap();
        assert!((norm(big.point(0.7)) - 1.1).abs() < 1e-15);
        let same = d.contract(0.0).unwrap();
        assert_eq!(same.point(0.2), d.point(0.2));
        let curve: CurveFn = Arc::new(|u| [(TAU * u).cos(), (TAU * u).sin()]);
        let p = PlanarRegion::parametric(curve, None, 64).unwrap();
        assert!(matches!(p.contract(0.1), Err(Error::MissingStarCenter)));
        assert!(d.contract(1.0).is_err());
    }

    #[test]
    fn product_multiplies() {
        let d = PlanarRegion::unit_disk();
        let pr = ProductRegion::new(vec![d.clone(), d.clone()]).unwrap();
        let id = |p: Point| -> Result<Point> { Ok(p) };
        assert_eq!(product_degree(&[id, id], &pr, &cfg()).unwrap().degree, 1);
        let fs: Vec<Box<dyn Fn(Point) -> Result<Point> + Sync>> = vec![
            Box::new(|p: Point| Ok([p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]])),
            Box::new(|_| Ok([1.0, 0.0])),
        ];
        assert_eq!(product_degree(&fs, &pr, &cfg()).unwrap().degree, 0);
        let single = ProductRegion::new(vec![d.clone()]).unwrap();
        assert_eq!(product_degree(&[id], &single, &cfg()).unwrap().degree, 1);
        let region = Region::from(pr);
        assert_eq!(region.dim(), 4);
        assert!(region.contains(&[0.1, 0.1, -0.2, 0.3]));
        assert_eq!(region.boundary_samples(8).len(), 16);
    }

    #[test]
    fn reversed_orientation_negates_angle() {
        let d = PlanarRegion::unit_disk();
        let vals: Vec<Point> = d.samples(100).iter().map(|p| [p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]]).collect();
        let mut rev = vals.clone();
        rev.reverse();
        assert!((raw_angle_sum(&vals) + raw_angle_sum(&rev)).abs() < 1e-12);
    }
}
