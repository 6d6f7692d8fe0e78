//! Run configuration: TOML with sections, `--set section.key=value`
//! overrides, validation and the canonical hash printed in CSV headers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::averaging::VALIDATION_SEED;
use crate::conditions::Tolerances;
use crate::error::Error;
use crate::flow::{IntegratorConfig, SystemDef};
use crate::periodic::{ShootConfig, ShootDirection};
use crate::registry;
use crate::topology::{PlanarRegion, ProductRegion, Region, WindingConfig, DEFAULT_RESOLUTION};
use crate::variational::FloquetConfig;

/// Configuration problem; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub system: SystemSpec,
    pub region: Option<RegionSpec>,
    pub integrator: IntegratorSpec,
    pub grids: GridSpec,
    pub tolerances: ToleranceSpec,
    pub cycle: CycleSpec,
    pub degree: DegreeSpec,
    pub resonance: ResonanceSpec,
    pub average: AverageSpec,
    pub periodic: PeriodicSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: VALIDATION_SEED,
            system: SystemSpec::default(),
            region: None,
            integrator: IntegratorSpec::default(),
            grids: GridSpec::default(),
            tolerances: ToleranceSpec::default(),
            cycle: CycleSpec::default(),
            degree: DegreeSpec::default(),
            resonance: ResonanceSpec::default(),
            average: AverageSpec::default(),
            periodic: PeriodicSpec::default(),
        }
    }
}

/// Either `builtin = "<name>"` or an inline definition; neither means the
/// circle-cycle example.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSpec {
    pub builtin: Option<String>,
    pub name: Option<String>,
    pub dim: Option<usize>,
    pub period: Option<f64>,
    pub phi: Option<Vec<String>>,
    pub psi: Option<Vec<String>>,
    /// Parameter values; for a built-in system they override its defaults.
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Circle,
    Polygon,
    Product,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub shape: Shape,
    pub center: Option<[f64; 2]>,
    pub radius: Option<f64>,
    pub vertices: Option<Vec<[f64; 2]>>,
    pub star_center: Option<[f64; 2]>,
    pub resolution: Option<usize>,
    /// Planar factors of a product region, in coordinate order.
    pub factors: Option<Vec<RegionSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        IntegratorSpec {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_step: None,
            max_steps: d.max_steps,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub s_points: usize,
    pub theta_points: usize,
    pub boundary_samples: usize,
    pub a0_samples: usize,
    pub lambda_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            s_points: 65,
            theta_points: 65,
            boundary_samples: 512,
            a0_samples: 512,
            lambda_points: 11,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    pub a0: f64,
    pub a1: f64,
    pub cycle: f64,
    pub melnikov: f64,
    pub one: f64,
    pub gap: f64,
    pub vanish: f64,
    pub residue: f64,
    pub max_boundary_samples: usize,
    pub shoot: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        let t = Tolerances::default();
        let f = FloquetConfig::default();
        let w = WindingConfig::default();
        let s = ShootConfig::default();
        ToleranceSpec {
            a0: t.a0_tol,
            a1: t.a1_tol,
            cycle: t.cycle_tol,
            melnikov: t.melnikov_tol,
            one: f.one_tol,
            gap: f.gap_tol,
            vanish: w.vanish_tol,
            residue: w.residue_tol,
            max_boundary_samples: w.max_samples,
            shoot: s.shoot_tol,
            max_iterations: s.max_iterations,
            max_halvings: s.max_halvings,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleSpec {
    /// Point on the unperturbed cycle at `t = 0`; defaults to `e_1`.
    pub start: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegreeSpec {
    /// Anchor time of the defect field `eta(T,s,.) - eta(0,s,.)`.
    pub s: f64,
    /// Second perturbation for a homotopy comparison; same `psi`.
    pub compare_phi: Option<Vec<String>>,
}

impl Default for DegreeSpec {
    fn default() -> Self {
        DegreeSpec { s: 0.0, compare_phi: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceSpec {
    /// `f(t, u, v)` with `u = x1`, `v = x2`.
    pub forcing: String,
    pub a_range: [f64; 2],
    pub theta_range: [f64; 2],
    pub grid: [usize; 2],
    pub box_half: f64,
    /// Shooting check at this `eps` from `xi(a0, theta0)`; 0 disables it.
    pub shoot_eps: f64,
}

impl Default for ResonanceSpec {
    fn default() -> Self {
        ResonanceSpec {
            forcing: "(1 - x1^2)*x2 + lam*cos(t)".into(),
            a_range: [0.5, 4.0],
            theta_range: [0.0, std::f64::consts::TAU],
            grid: [8, 8],
            box_half: 0.2,
            shoot_eps: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AverageSpec {
    pub radius: f64,
    pub n_max: usize,
    pub phi_tol: f64,
    /// Initial point; defaults to `0.5` in every coordinate.
    pub xi0: Option<Vec<f64>>,
    pub d: f64,
    pub eps: Vec<f64>,
    pub gamma_tol: f64,
}

impl Default for AverageSpec {
    fn default() -> Self {
        AverageSpec {
            radius: 1.0,
            n_max: 1 << 12,
            phi_tol: 1e-7,
            xi0: None,
            d: 1.0,
            eps: vec![0.01, 0.005],
            gamma_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionSpec {
    Forward,
    Backward,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSpec {
    /// Nearest `T`-periodic point of the unperturbed flow.
    PeriodicSet,
    /// The cycle through `cycle.start`.
    Cycle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodicSpec {
    pub eps: f64,
    /// Newton seed; defaults to the region's star center.
    pub start: Option<Vec<f64>>,
    pub eps_list: Vec<f64>,
    pub warm_start: bool,
    pub direction: DirectionSpec,
    pub reference: ReferenceSpec,
}

impl Default for PeriodicSpec {
    fn default() -> Self {
        PeriodicSpec {
            eps: 1e-2,
            start: None,
            eps_list: vec![1e-2, 5e-3, 2.5e-3],
            warm_start: false,
            direction: DirectionSpec::Auto,
            reference: ReferenceSpec::PeriodicSet,
        }
    }
}

/// Reads the config file (if any), applies overrides and validates.
pub fn load(path: Option<&Path>, sets: &[String]) -> CResult<(RunConfig, String)> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| ConfigError(format!("config file {}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for s in sets {
        apply_override(&mut table, s)?;
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError(format!("config: {}", e.message())))?;
    cfg.validate()?;
    let hash = cfg.hash();
    Ok((cfg, hash))
}

/// `section.key=value`; the value is read as a TOML value, falling back to
/// a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> CResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("--set expects key=value, got {spec:?}")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError(format!("--set: malformed key {key:?}")));
    }
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut cur = table;
    for p in &path[..path.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("--set: {p} is not a section")))?;
    }
    cur.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

fn positive(name: &str, v: f64) -> CResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> CResult<()> {
        let sys = self.system()?;
        let k = sys.dim();
        if let Some(r) = &self.region {
            let region = self.build_region(r)?;
            if region.dim() != k {
                return Err(ConfigError(format!(
                    "region dimension {} does not match system dimension {k}",
                    region.dim()
                )));
            }
        }
        self.integrator_config().validate()?;
        for (n, v) in [
            ("tolerances.a0", self.tolerances.a0),
            ("tolerances.a1", self.tolerances.a1),
            ("tolerances.cycle", self.tolerances.cycle),
            ("tolerances.one", self.tolerances.one),
            ("tolerances.gap", self.tolerances.gap),
            ("tolerances.vanish", self.tolerances.vanish),
            ("tolerances.residue", self.tolerances.residue),
            ("tolerances.shoot", self.tolerances.shoot),
            ("average.radius", self.average.radius),
            ("average.phi_tol", self.average.phi_tol),
            ("average.d", self.average.d),
            ("average.gamma_tol", self.average.gamma_tol),
            ("resonance.box_half", self.resonance.box_half),
            ("periodic.eps", self.periodic.eps),
        ] {
            positive(n, v)?;
        }
        for (n, v) in [("grids.s_points", self.grids.s_points), ("grids.theta_points", self.grids.theta_points), ("grids.lambda_points", self.grids.lambda_points)] {
            if v < 2 {
                return Err(ConfigError(format!("{n} must be at least 2, got {v}")));
            }
        }
        for e in self.periodic.eps_list.iter().chain(&self.average.eps) {
            positive("eps list entry", *e)?;
        }
        for (n, v) in [("cycle.start", &self.cycle.start), ("average.xi0", &self.average.xi0), ("periodic.start", &self.periodic.start)] {
            if let Some(v) = v {
                if v.len() != k {
                    return Err(ConfigError(format!("{n} has length {}, system dimension is {k}", v.len())));
                }
            }
        }
        if let Some(c) = &self.degree.compare_phi {
            if c.len() != k {
                return Err(ConfigError(format!("degree.compare_phi has {} components, system dimension is {k}", c.len())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization of the effective config.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            write!(out, "{b:02x}").expect("write to string");
        }
        out
    }

    pub fn system(&self) -> CResult<SystemDef> {
        let s = &self.system;
        let inline = s.phi.is_some() || s.psi.is_some() || s.dim.is_some() || s.period.is_some();
        let default_name = (!inline && s.builtin.is_none()).then(|| registry::E1_NAME.to_string());
        match (s.builtin.as_ref().or(default_name.as_ref()), inline) {
            (Some(name), false) => {
                let mut sys = match name.as_str() {
                    registry::E2_NAME => registry::e2_resonance_with(*s.params.get("lam").unwrap_or(&1.0)),
                    _ => registry::builtin(name).ok_or_else(|| {
                        let names: Vec<String> = registry::builtin_registry().into_iter().map(|s| s.name).collect();
                        ConfigError(format!("unknown built-in system {name:?}; valid names: {}", names.join(", ")))
                    })?,
                };
                if let Some(bad) = s.params.keys().find(|k| !sys.params.contains_key(*k)) {
                    return Err(ConfigError(format!("system {name} has no parameter {bad:?}")));
                }
                if let Some(n) = &s.name {
                    sys.name = n.clone();
                }
                Ok(sys)
            }
            (Some(_), true) => Err(ConfigError("system: give either builtin or an inline definition, not both".into())),
            (None, _) => {
                let (Some(phi), Some(psi)) = (&s.phi, &s.psi) else {
                    return Err(ConfigError("inline system needs both phi and psi".into()));
                };
                if let Some(d) = s.dim {
                    if phi.len() != d || psi.len() != d {
                        return Err(ConfigError(format!(
                            "system.dim = {d} but phi has {} and psi has {} components",
                            phi.len(),
                            psi.len()
                        )));
                    }
                }
                let period = s.period.unwrap_or(std::f64::consts::TAU);
                let name = s.name.clone().unwrap_or_else(|| "inline".into());
                Ok(SystemDef::from_sources(name, period, phi, psi, s.params.clone())?)
            }
        }
    }

    /// The same system with `phi` replaced by `degree.compare_phi`.
    pub fn compare_system(&self, sys: &SystemDef) -> CResult<Option<SystemDef>> {
        let Some(phi) = &self.degree.compare_phi else {
            return Ok(None);
        };
        let psi = sys
            .psi
            .expressions()
            .ok_or_else(|| ConfigError("homotopy comparison needs an expression-defined psi".into()))?;
        let psi_src: Vec<String> = psi.components.iter().map(|c| c.to_string()).collect();
        Ok(Some(SystemDef::from_sources(
            format!("{}-compare", sys.name),
            sys.period,
            phi,
            &psi_src,
            sys.params.clone(),
        )?))
    }

    pub fn region(&self) -> CResult<Region> {
        match &self.region {
            Some(r) => self.build_region(r),
            None => Ok(Region::Planar(PlanarRegion::unit_disk())),
        }
    }

    fn planar(&self, r: &RegionSpec) -> CResult<PlanarRegion> {
        let res = r.resolution.unwrap_or(DEFAULT_RESOLUTION);
        match r.shape {
            Shape::Circle => {
                let center = r.center.unwrap_or([0.0, 0.0]);
                let radius = r.radius.ok_or_else(|| ConfigError("circle region needs radius".into()))?;
                let c = PlanarRegion::circle(center, radius, res)?;
                Ok(match r.star_center {
                    Some(_) => return Err(ConfigError("circle regions use their center as star center".into())),
                    None => c,
                })
            }
            Shape::Polygon => {
                let v = r.vertices.clone().ok_or_else(|| ConfigError("polygon region needs vertices".into()))?;
                let p = PlanarRegion::polygon(v, r.star_center)?;
                Ok(match r.resolution {
                    Some(n) => p.with_resolution(n),
                    None => p,
                })
            }
            Shape::Product => Err(ConfigError("product factors must be planar".into())),
        }
    }

    fn build_region(&self, r: &RegionSpec) -> CResult<Region> {
        match r.shape {
            Shape::Product => {
                let f = r.factors.as_ref().ok_or_else(|| ConfigError("product region needs factors".into()))?;
                let factors = f.iter().map(|s| self.planar(s)).collect::<CResult<Vec<_>>>()?;
                Ok(Region::Product(ProductRegion::new(factors)?))
            }
            _ => Ok(Region::Planar(self.planar(r)?)),
        }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.integrator.rel_tol,
            abs_tol: self.integrator.abs_tol,
            max_step: self.integrator.max_step.unwrap_or(f64::INFINITY),
            max_steps: self.integrator.max_steps,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            a0_tol: self.tolerances.a0,
            a1_tol: self.tolerances.a1,
            cycle_tol: self.tolerances.cycle,
            melnikov_tol: self.tolerances.melnikov,
        }
    }

    pub fn winding_config(&self) -> WindingConfig {
        WindingConfig {
            initial_samples: self.grids.boundary_samples,
            vanish_tol: self.tolerances.vanish,
            max_samples: self.tolerances.max_boundary_samples,
            residue_tol: self.tolerances.residue,
        }
    }

    pub fn floquet_config(&self) -> FloquetConfig {
        FloquetConfig {
            one_tol: self.tolerances.one,
            gap_tol: self.tolerances.gap,
            cycle_tol: self.tolerances.cycle,
        }
    }

    pub fn shoot_config(&self) -> ShootConfig {
        ShootConfig {
            shoot_tol: self.tolerances.shoot,
            max_iterations: self.tolerances.max_iterations,
            max_halvings: self.tolerances.max_halvings,
            direction: match self.periodic.direction {
                DirectionSpec::Forward => ShootDirection::Forward,
                DirectionSpec::Backward => ShootDirection::Backward,
                DirectionSpec::Auto => ShootDirection::Auto,
            },
            ..ShootConfig::default()
        }
    }

    pub fn cycle_start(&self, dim: usize) -> Vec<f64> {
        self.cycle.start.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            e
        })
    }

    pub fn average_xi0(&self, dim: usize) -> Vec<f64> {
        self.average.xi0.clone().unwrap_or_else(|| vec![0.5; dim])
    }

    /// Newton seed for the shooting commands.
    pub fn periodic_start(&self, region: &Region) -> Vec<f64> {
        if let Some(s) = &self.periodic.start {
            return s.clone();
        }
        region
            .factors()
            .iter()
            .flat_map(|f| f.star_center().unwrap_or([0.0, 0.0]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_hash_is_stable() {
        let (a, ha) = load(None, &[]).unwrap();
        let (_, hb) = load(None, &[]).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(ha.len(), 64);
        assert_eq!(a.system().unwrap().name, registry::E1_NAME);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let (c, h) = load(None, &["grids.s_points=9".into(), "system.builtin=e3-scalar".into(), "average.xi0=[0.25]".into()]).unwrap();
        assert_eq!(c.grids.s_points, 9);
        assert_eq!(c.system().unwrap().dim(), 1);
        assert_ne!(h, load(None, &[]).unwrap().1);
    }

    #[test]
    fn unknown_key_lists_valid_ones() {
        let e = load(None, &["grids.bogus=1".into()]).unwrap_err();
        assert!(e.0.contains("bogus") && e.0.contains("s_points"), "{}", e.0);
    }

    #[test]
    fn missing_file_names_path() {
        let e = load(Some(Path::new("/nonexistent/e1.cfg")), &[]).unwrap_err();
        assert!(e.0.contains("/nonexistent/e1.cfg"));
    }

    #[test]
    fn dimension_mismatches_rejected() {
        assert!(load(None, &["system.builtin=e3-scalar".into(), "cycle.start=[1.0, 0.0]".into()]).is_err());
        let e = load(None, &["system.builtin=nope".into()]).unwrap_err();
        assert!(e.0.contains("e1-circle"));
    }

    #[test]
    fn inline_system_and_polygon_region() {
        let text = r#"
[system]
phi = ["0", "cos(t)*k"]
psi = ["-x2", "x1"]
[system.params]
k = 2.0
[region]
shape = "polygon"
vertices = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
star_center = [0.0, 0.0]
"#;
        let dir = std::env::temp_dir().join(format!("porbits-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("inline.toml");
        std::fs::write(&p, text).unwrap();
        let (c, _) = load(Some(&p), &[]).unwrap();
        let sys = c.system().unwrap();
        assert_eq!(sys.phi_at(0.0, &[0.0, 0.0]).unwrap(), vec![0.0, 2.0]);
        assert!(c.region().unwrap().contains(&[0.9, -0.9]));
    }
}
