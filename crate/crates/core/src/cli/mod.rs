//! `porbits` command-line front end.
//!
//! Every command reads an optional TOML config (`--config`), applies
//! `--set section.key=value` overrides, writes one CSV block (to `--out` or
//! standard output), optionally an SVG plot (`--plot`), and prints a
//! one-line verdict. The verdict goes to standard output when the CSV goes
//! to a file and to standard error otherwise, so piped CSV stays clean.
//!
//! Exit codes: 0 holds / converged, 2 fails, 3 inconclusive (including
//! numerical breakdowns), 1 usage or configuration error.

pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::averaging::{averaged_field, verify_theorem4, CauchyVerdict};
use crate::conditions::{
    check_a0, check_a1, check_a2, check_a3, melnikov_profile, resonance_coords, theorem2_compare, uniform_grid,
    HypothesisReport, ResonanceMap, Verdict,
};
use crate::error::Error;
use crate::flow::SystemDef;
use crate::periodic::{
    eps_sweep, membership_x, orbit, shoot, CycleReference,
    PeriodicOrbitResult, SeedStrategy, SweepEntry,
};
use crate::registry;
use crate::topology::{winding_number, Region, WindingConfig};
use crate::variational::{eta_defect_field, periodic_cycle};

use config::{ConfigError, ReferenceSpec, RunConfig};
use output::{fmt_f64, svg_plot, Cell, Series, Table};

#[derive(Parser, Debug)]
#[command(name = "porbits", version, about = "Periodic solutions of x' = eps*phi(t,x) + psi(t,x): hypothesis checks, degrees, averaging, shooting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set grids.s_points=33`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV destination (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// SVG plot destination.
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print phi, psi and the divergence of psi.
    Describe {
        /// Built-in system name (default: the configured system).
        system: Option<String>,
    },
    /// Check one of the hypotheses A0-A3.
    Check {
        #[arg(value_enum)]
        condition: Condition,
    },
    /// Weighted Melnikov integral over the cycle phases.
    Melnikov,
    /// Rotation number of the defect field, with a 2x refinement check or
    /// a homotopy comparison.
    Degree,
    /// Zeros of the resonance map H(a, theta) with local degrees.
    Resonance,
    /// Averaged field and comparison with the full solution at one eps.
    Average,
    /// Error of the averaged approximation over [0, d/eps] for each eps.
    VerifyCauchy,
    /// Newton shooting for a T-periodic orbit at one eps.
    FindPeriodic,
    /// Shooting over a list of eps with convergence rate.
    Sweep,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Condition {
    #[value(name = "A0")]
    A0,
    #[value(name = "A1")]
    A1,
    #[value(name = "A2")]
    A2,
    #[value(name = "A3")]
    A3,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Describe { .. } => "describe".into(),
            Command::Check { condition } => format!("check {condition:?}"),
            Command::Melnikov => "melnikov".into(),
            Command::Degree => "degree".into(),
            Command::Resonance => "resonance".into(),
            Command::Average => "average".into(),
            Command::VerifyCauchy => "verify-cauchy".into(),
            Command::FindPeriodic => "find-periodic".into(),
            Command::Sweep => "sweep".into(),
        }
    }
}

/// Result of one command before it is written out.
struct Outcome {
    table: Table,
    verdict: String,
    code: i32,
    plot: Option<(String, String, String, Vec<Series>)>,
}

enum Failure {
    Config(String),
    Numeric(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(_)
            | Error::Dimension { .. }
            | Error::Parse(_)
            | Error::InvalidRegion(_)
            | Error::MissingStarCenter => Failure::Config(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<Outcome, Failure>;

/// Runs one command; `argv` excludes the program name.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I: IntoIterator<Item = String>>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = std::iter::once("porbits".to_string()).chain(argv);
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    let (cfg, hash) = match config::load(cli.config.as_deref(), &cli.set) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return 1;
        }
    };
    if let Command::Describe { system } = &cli.command {
        return match describe(&cfg, system.as_deref()) {
            Ok(text) => emit_text(&cli, &text, out, err),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                1
            }
        };
    }
    let result = pool.install(|| dispatch(&cli.command, &cfg));
    let mut outcome = match result {
        Ok(o) => o,
        Err(Failure::Config(m)) => {
            let _ = writeln!(err, "error: {m}");
            return 1;
        }
        Err(Failure::Numeric(m)) => {
            let _ = writeln!(err, "{} inconclusive ({m})", cli.command.name());
            return 3;
        }
    };
    let sys_name = cfg.system().map(|s| s.name).unwrap_or_default();
    let mut header = vec![
        format!("porbits {}", env!("CARGO_PKG_VERSION")),
        format!("command: {}", cli.command.name()),
        format!("system: {sys_name}"),
        format!("config-sha256: {hash}"),
        format!("seed: {}", cfg.seed),
    ];
    header.append(&mut outcome.table.comments);
    outcome.table.comments = header;
    let csv = outcome.table.render();
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &csv) {
                let _ = writeln!(err, "error: cannot write {}: {e}", p.display());
                return 1;
            }
            let _ = writeln!(out, "{}", outcome.verdict);
        }
        None => {
            let _ = out.write_all(csv.as_bytes());
            let _ = writeln!(err, "{}", outcome.verdict);
        }
    }
    if let (Some(p), Some((title, xl, yl, series))) = (&cli.plot, &outcome.plot) {
        if let Err(e) = std::fs::write(p, svg_plot(title, xl, yl, series)) {
            let _ = writeln!(err, "error: cannot write {}: {e}", p.display());
            return 1;
        }
    }
    outcome.code
}

fn emit_text(cli: &Cli, text: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match &cli.out {
        Some(p) => match std::fs::write(p, text) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: cannot write {}: {e}", p.display());
                1
            }
        },
        None => {
            let _ = out.write_all(text.as_bytes());
            0
        }
    }
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> CmdResult {
    match cmd {
        Command::Describe { .. } => unreachable!("handled before dispatch"),
        Command::Check { condition } => check(*condition, cfg),
        Command::Melnikov => melnikov(cfg),
        Command::Degree => degree(cfg),
        Command::Resonance => resonance(cfg),
        Command::Average => average(cfg),
        Command::VerifyCauchy => verify_cauchy(cfg),
        Command::FindPeriodic => find_periodic(cfg),
        Command::Sweep => sweep(cfg),
    }
}

fn describe(cfg: &RunConfig, name: Option<&str>) -> std::result::Result<String, ConfigError> {
    let sys = match name {
        Some(n) => registry::builtin(n).ok_or_else(|| {
            let names: Vec<String> = registry::builtin_registry().into_iter().map(|s| s.name).collect();
            ConfigError(format!("unknown system {n:?}; valid names: {}", names.join(", ")))
        })?,
        None => cfg.system()?,
    };
    let mut s = String::new();
    let mut line = |l: String| {
        s.push_str(&l);
        s.push('\n');
    };
    line(format!("system: {}", sys.name));
    line(format!("dimension: {}", sys.dim()));
    line(format!("period: {}", fmt_f64(sys.period)));
    if sys.params.is_empty() {
        line("parameters: none".into());
    } else {
        let p: Vec<String> = sys.params.iter().map(|(k, v)| format!("{k} = {}", fmt_f64(*v))).collect();
        line(format!("parameters: {}", p.join(", ")));
    }
    for (label, field) in [("phi", &sys.phi), ("psi", &sys.psi)] {
        match field.expressions() {
            Some(e) => {
                for (i, c) in e.components.iter().enumerate() {
                    line(format!("{label}[{}] = {c}", i + 1));
                }
            }
            None => line(format!("{label}: opaque callable")),
        }
    }
    match sys.psi.expressions() {
        Some(e) => line(format!("Sp psi' = {}", e.divergence())),
        None => line("Sp psi': finite differences only".into()),
    }
    let (pj, sj) = sys.jacobian_sources();
    line(format!("jacobians: phi {pj:?}, psi {sj:?}"));
    for n in &sys.notes {
        line(format!("note: {n}"));
    }
    Ok(s)
}

fn report_outcome(report: &HypothesisReport) -> Outcome {
    let mut table = Table::from_f64(&report.columns, &report.rows);
    table.comments.push(format!("verdict: {}", report.verdict_line()));
    if let Some(w) = &report.witness {
        table.comments.push(format!(
            "witness: point {:?}, param {:?}, value {}, {}",
            w.point,
            w.param,
            fmt_f64(w.value),
            w.note
        ));
    }
    let plot = (report.columns.len() >= 2 && !report.rows.is_empty()).then(|| {
        let series = (1..report.columns.len().min(3))
            .map(|j| Series {
                name: report.columns[j].clone(),
                points: report.rows.iter().map(|r| (r[0], r[j])).collect(),
            })
            .collect();
        (report.verdict_line(), report.columns[0].clone(), String::new(), series)
    });
    Outcome {
        table,
        verdict: report.verdict_line(),
        code: report.verdict.exit_code(),
        plot,
    }
}

fn check(c: Condition, cfg: &RunConfig) -> CmdResult {
    let sys = cfg.system()?;
    let icfg = cfg.integrator_config();
    let tol = cfg.tolerances();
    let report = match c {
        Condition::A0 => check_a0(&sys, &cfg.region()?, cfg.grids.a0_samples, &icfg, &tol)?,
        Condition::A1 => {
            let s_grid = uniform_grid(sys.period, cfg.grids.s_points);
            check_a1(&sys, &cfg.region()?, &s_grid, cfg.grids.boundary_samples, &icfg, &tol)?
        }
        Condition::A2 => check_a2(&sys, &cfg.region()?, &icfg, &cfg.winding_config())?.0,
        Condition::A3 => {
            let cycle = periodic_cycle(&sys, &cfg.cycle_start(sys.dim()), tol.cycle_tol, &icfg)?;
            let theta = uniform_grid(sys.period, cfg.grids.theta_points);
            check_a3(&sys, &cycle, &theta, &icfg, &cfg.floquet_config())?.0
        }
    };
    Ok(report_outcome(&report))
}

fn melnikov(cfg: &RunConfig) -> CmdResult {
    let sys = cfg.system()?;
    let icfg = cfg.integrator_config();
    let tol = cfg.tolerances();
    let cycle = periodic_cycle(&sys, &cfg.cycle_start(sys.dim()), tol.cycle_tol, &icfg)?;
    let theta = uniform_grid(sys.period, cfg.grids.theta_points);
    let prof = melnikov_profile(&sys, &cycle, &theta, &tol)?;
    let report = prof.report(&tol);
    let mut table = Table::new(vec!["theta".into(), "M".into()]);
    for (t, m) in prof.theta_grid.iter().zip(&prof.values) {
        table.push(vec![Cell::F(*t), Cell::F(*m)]);
    }
    table.comments.push(format!(
        "divergence weight range [{}, {}]",
        fmt_f64(prof.weight_min),
        fmt_f64(prof.weight_max)
    ));
    let series = vec![Series {
        name: "M(theta)".into(),
        points: prof.theta_grid.iter().copied().zip(prof.values.iter().copied()).collect(),
    }];
    Ok(Outcome {
        table,
        verdict: report.verdict_line(),
        code: report.verdict.exit_code(),
        plot: Some(("Melnikov integral".into(), "theta".into(), "M".into(), series)),
    })
}

fn degree(cfg: &RunConfig) -> CmdResult {
    let sys = cfg.system()?;
    let icfg = cfg.integrator_config();
    let tol = cfg.tolerances();
    let wcfg = cfg.winding_config();
    let region = cfg.region()?;
    if let Some(other) = cfg.compare_system(&sys)? {
        let Region::Planar(planar) = &region else {
            return Err(Failure::Config("homotopy comparison needs a planar region".into()));
        };
        let lambda = uniform_grid(1.0, cfg.grids.lambda_points);
        let s_grid = uniform_grid(sys.period, cfg.grids.s_points);
        let h = theorem2_compare(&sys, &other, planar, &lambda, &s_grid, cfg.grids.boundary_samples, &icfg, &wcfg, &tol)?;
        let mut o = report_outcome(&h.report);
        o.table.comments.push(format!(
            "degrees {:?} / {:?}, grid min {}, segment min {}",
            h.degree1,
            h.degree2,
            fmt_f64(h.grid_min),
            fmt_f64(h.segment_min)
        ));
        return Ok(o);
    }
    let refined = WindingConfig {
        initial_samples: 2 * wcfg.initial_samples,
        ..wcfg
    };
    let mut table = Table::new(
        ["initial_samples", "samples_used", "degree", "min_field_norm", "total_angle"]
            .map(String::from)
            .to_vec(),
    );
    let mut degrees = Vec::new();
    let mut vanished = None;
    for w in [wcfg, refined] {
        let rep = match &region {
            Region::Planar(p) => {
                let field = eta_defect_field(&sys, cfg.degree.s, &icfg)?;
                winding_number(
                    |q| {
                        let v = field.eval(&q)?;
                        Ok([v[0], v[1]])
                    },
                    p,
                    &w,
                )
            }
            Region::Product(_) => {
                if cfg.degree.s != 0.0 {
                    return Err(Failure::Config("product regions support degree.s = 0 only".into()));
                }
                let (r, d) = check_a2(&sys, &region, &icfg, &w)?;
                d.ok_or(Error::Invalid(r.summary))
            }
        };
        match rep {
            Ok(d) => {
                table.push(vec![
                    Cell::I(w.initial_samples as i64),
                    Cell::I(d.samples_used as i64),
                    Cell::I(d.degree),
                    Cell::F(d.min_field_norm),
                    Cell::F(d.total_angle),
                ]);
                degrees.push(d.degree);
            }
            Err(e @ (Error::FieldVanishes { .. } | Error::NonConvergent { .. })) => {
                vanished = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let (verdict, line) = match (vanished, degrees.as_slice()) {
        (Some(m), _) => (Verdict::Inconclusive, format!("degree inconclusive ({m})")),
        (None, [a, b]) if a != b => (Verdict::Inconclusive, format!("degree inconclusive (unstable under refinement: {a} vs {b})")),
        (None, [a, _]) if *a == 0 => (Verdict::Fails, "degree fails (rotation number 0, stable under 2x refinement)".into()),
        (None, [a, _]) => (Verdict::Holds, format!("degree holds (rotation number {a}, stable under 2x refinement)")),
        _ => unreachable!("two refinement levels"),
    };
    Ok(Outcome {
        table,
        verdict: line,
        code: verdict.exit_code(),
        plot: None,
    })
}

fn resonance(cfg: &RunConfig) -> CmdResult {
    let sys = cfg.system()?;
    let icfg = cfg.integrator_config();
    let wcfg = cfg.winding_config();
    let rc = &cfg.resonance;
    let map = ResonanceMap::new(&rc.forcing, &sys.params)?;
    let rep = map.find_zeros((rc.a_range[0], rc.a_range[1]), (rc.theta_range[0], rc.theta_range[1]), (rc.grid[0], rc.grid[1]))?;
    let shooting = rc.shoot_eps > 0.0 && sys.dim() == 2;
    let mut table = Table::new(
        ["a", "theta", "det", "residual", "box_degree", "sign_det", "amplitude", "shoot_residual"]
            .map(String::from)
            .to_vec(),
    );
    table.comments.push(format!("forcing f(t, x1, x2) = {}", map.source()));
    table.comments.push(format!(
        "seeds {}, discarded {}, box half-width {}",
        rep.seeds,
        rep.discarded,
        fmt_f64(rc.box_half)
    ));
    if shooting {
        table.comments.push(format!("shooting at eps = {} from xi(a, theta) = (-a cos theta, a sin theta)", fmt_f64(rc.shoot_eps)));
    }
    let mut all_consistent = true;
    let mut any = false;
    for z in &rep.zeros {
        let sign = if z.det > 0.0 { 1 } else if z.det < 0.0 { -1 } else { 0 };
        let deg = map.box_degree(z.a, z.theta, rc.box_half, &wcfg).map(|d| d.degree);
        let (amp, sres) = if shooting {
            let seed = resonance_coords(z.a, z.theta);
            match shoot(&sys, rc.shoot_eps, &seed, &icfg, &cfg.shoot_config()) {
                Ok(r) => (Some(r.xi.iter().map(|c| c * c).sum::<f64>().sqrt()), Some(r.residual)),
                Err(_) => (None, None),
            }
        } else {
            (None, None)
        };
        let ok_deg = matches!(deg, Ok(d) if d == sign && d != 0);
        let ok_amp = !shooting || amp.is_some_and(|a| (a - z.a).abs() <= 0.05);
        all_consistent &= ok_deg && ok_amp;
        any = true;
        table.push(vec![
            Cell::F(z.a),
            Cell::F(z.theta),
            Cell::F(z.det),
            Cell::F(z.residual),
            deg.map_or(Cell::Empty, Cell::I),
            Cell::I(sign),
            amp.into(),
            sres.into(),
        ]);
    }
    let (v, line) = if rep.degenerate {
        (Verdict::Fails, "resonance fails (H vanishes identically on the seed grid)".to_string())
    } else if !any {
        (Verdict::Fails, "resonance fails (no zeros of H in the search box)".to_string())
    } else if all_consistent {
        (Verdict::Holds, format!("resonance holds ({} zero(s); box degree equals sign det H')", rep.zeros.len()))
    } else {
        (Verdict::Inconclusive, format!("resonance inconclusive ({} zero(s); degree/sign or amplitude mismatch)", rep.zeros.len()))
    };
    let plot = rep.zeros.first().map(|z| {
        let n = 257;
        let pts: Vec<(f64, [f64; 2])> = (0..n)
            .filter_map(|i| {
                let th = std::f64::consts::TAU * i as f64 / (n - 1) as f64;
                map.eval(z.a, th).ok().map(|h| (th, h))
            })
            .collect();
        let series = vec![
            Series { name: "H1(a0, theta)".into(), points: pts.iter().map(|(t, h)| (*t, h[0])).collect() },
            Series { name: "H2(a0, theta)".into(), points: pts.iter().map(|(t, h)| (*t, h[1])).collect() },
        ];
        ("Resonance map at a0".to_string(), "theta".to_string(), "H".to_string(), series)
    });
    Ok(Outcome { table, verdict: line, code: v.exit_code(), plot })
}

fn cauchy_table(verdicts: &[CauchyVerdict], with_eps: bool) -> Table {
    let k = verdicts.first().map_or(0, |v| v.xi0.len());
    let mut cols = Vec::new();
    if with_eps {
        cols.push("eps".to_string());
    }
    cols.push("t".into());
    cols.extend((1..=k).map(|i| format!("x{i}")));
    cols.extend((1..=k).map(|i| format!("approx{i}")));
    cols.push("error".into());
    let mut table = Table::new(cols);
    for v in verdicts {
        for i in 0..v.times.len() {
            let mut row = Vec::new();
            if with_eps {
                row.push(Cell::F(v.eps));
            }
            row.push(Cell::F(v.times[i]));
            row.extend(v.x[i].iter().map(|c| Cell::F(*c)));
            row.extend(v.approx[i].iter().map(|c| Cell::F(*c)));
            row.push(Cell::F(v.errors[i]));
            table.push(row);
        }
    }
    table
}

fn cauchy_plot(verdicts: &[CauchyVerdict]) -> Vec<Series> {
    verdicts
        .iter()
        .map(|v| Series {
            name: format!("eps = {}", fmt_f64(v.eps)),
            points: v.times.iter().zip(&v.errors).map(|(t, e)| (v.eps * t, *e)).collect(),
        })
        .collect()
}

fn averaging_run(cfg: &RunConfig, eps: &[f64]) -> std::result::Result<(Vec<CauchyVerdict>, Vec<String>), Failure> {
    let sys = cfg.system()?;
    let icfg = cfg.integrator_config();
    let ac = &cfg.average;
    let field = averaged_field(&sys, ac.radius, ac.n_max, ac.phi_tol, &icfg)?;
    let trend: Vec<String> = field.trend.iter().map(|v| fmt_f64(*v)).collect();
    let comments = vec![
        format!(
            "averaged field: n = {}, radius {}, {} validation samples",
            field.n_used,
            fmt_f64(field.radius),
            field.samples.len()
        ),
        format!("Cauchy trend max|Phi_n - Phi_2n|: {}", trend.join(" ")),
    ];
    let v = verify_theorem4(&sys, &field, &cfg.average_xi0(sys.dim()), ac.d, eps, ac.gamma_tol, &icfg)?;
    Ok((v, comments))
}

fn average(cfg: &RunConfig) -> CmdResult {
    let eps = *cfg
        .average
        .eps
        .first()
        .ok_or_else(|| Failure::Config("average.eps is empty".into()))?;
    let (v, comments) = averaging_run(cfg, &[eps])?;
    let mut table = cauchy_table(&v, false);
    table.comments = comments;
    let r = &v[0];
    let (verdict, line) = if r.pass {
        (Verdict::Holds, format!("average holds (eps {}, sup error {} <= gamma_tol {})", fmt_f64(r.eps), fmt_f64(r.sup_error), fmt_f64(r.gamma_tol)))
    } else {
        (Verdict::Fails, format!("average fails (eps {}, sup error {} > gamma_tol {})", fmt_f64(r.eps), fmt_f64(r.sup_error), fmt_f64(r.gamma_tol)))
    };
    Ok(Outcome {
        table,
        verdict: line,
        code: verdict.exit_code(),
        plot: Some(("Averaging error".into(), "slow time eps*t".into(), "|x - approx|".into(), cauchy_plot(&v))),
    })
}

fn verify_cauchy(cfg: &RunConfig) -> CmdResult {
    if cfg.average.eps.is_empty() {
        return Err(Failure::Config("average.eps is empty".into()));
    }
    let (v, comments) = averaging_run(cfg, &cfg.average.eps)?;
    let mut table = cauchy_table(&v, true);
    table.comments = comments;
    let errs: Vec<String> = v.iter().map(|r| format!("{}: {}", fmt_f64(r.eps), fmt_f64(r.sup_error))).collect();
    table.comments.push(format!("sup errors: {}", errs.join(", ")));
    let ratios: Vec<String> = v.windows(2).map(|w| fmt_f64(w[0].sup_error / w[1].sup_error)).collect();
    if !ratios.is_empty() {
        table.comments.push(format!("consecutive error ratios: {}", ratios.join(", ")));
    }
    let pass = v.iter().all(|r| r.pass);
    let verdict = if pass { Verdict::Holds } else { Verdict::Fails };
    let line = format!(
        "verify-cauchy {} ({} runs, sup errors [{}], ratios [{}])",
        verdict,
        v.len(),
        errs.join(", "),
        ratios.join(", ")
    );
    Ok(Outcome {
        table,
        verdict: line,
        code: verdict.exit_code(),
        plot: Some(("Averaging error".into(), "slow time eps*t".into(), "|x - approx|".into(), cauchy_plot(&v))),
    })
}

fn orbit_columns(k: usize, with_cycle: bool) -> Vec<String> {
    let mut c = vec!["eps".to_string()];
    c.extend((1..=k).map(|i| format!("xi{i}")));
    c.extend(["residual", "iterations", "converged"].map(String::from));
    for i in 1..=k {
        c.push(format!("mu{i}_re"));
        c.push(format!("mu{i}_im"));
    }
    c.extend(["in_X", "dist_to_boundary"].map(String::from));
    if with_cycle {
        c.push("dist_to_cycle".into());
    }
    c
}

fn orbit_row(eps: f64, k: usize, r: Option<&PeriodicOrbitResult>, in_x: Option<bool>, bdist: Option<f64>, cdist: Option<Option<f64>>) -> Vec<Cell> {
    let mut row = vec![Cell::F(eps)];
    match r {
        Some(r) => {
            row.extend(r.xi.iter().map(|c| Cell::F(*c)));
            row.extend([Cell::F(r.residual), Cell::I(r.iterations as i64), Cell::B(r.converged)]);
            for m in &r.multipliers {
                row.push(Cell::F(m.re));
                row.push(Cell::F(m.im));
            }
        }
        None => {
            row.extend((0..k).map(|_| Cell::Empty));
            row.extend([Cell::Empty, Cell::Empty, Cell::B(false)]);
            row.extend((0..2 * k).map(|_| Cell::Empty));
        }
    }
    row.push(in_x.map_or(Cell::Empty, Cell::B));
    row.push(bdist.into());
    if let Some(c) = cdist {
        row.push(c.into());
    }
    row
}

fn find_periodic(cfg: &RunConfig) -> CmdResult {
    let sys = cfg.system()?;
    let icfg = cfg.integrator_config();
    let region = cfg.region()?;
    let eps = cfg.periodic.eps;
    let seed = cfg.periodic_start(&region);
    let k = sys.dim();
    let mut table = Table::new(orbit_columns(k, false));
    table.comments.push(format!("seed {seed:?}"));
    match shoot(&sys, eps, &seed, &icfg, &cfg.shoot_config()) {
        Ok(r) => {
            let orb = orbit(&sys, &r, &icfg)?;
            let m = membership_x(&sys, &orb, &region, &icfg)?;
            let bd = region.boundary_distance(&r.xi);
            table.comments.push(format!("direction {:?}, residual history {:?}", r.direction, r.residual_history));
            table.push(orbit_row(eps, k, Some(&r), Some(m.in_x), Some(bd), None));
            let line = format!(
                "find-periodic converged (eps {}, xi {:?}, residual {}, in_X {})",
                fmt_f64(eps),
                r.xi,
                fmt_f64(r.residual),
                m.in_x
            );
            let plot = orbit_plot(&sys, &orb);
            Ok(Outcome { table, verdict: line, code: 0, plot: Some(plot) })
        }
        Err(e @ (Error::NewtonStalled { .. } | Error::SingularJacobian { .. })) => {
            table.push(orbit_row(eps, k, None, None, None, None));
            Ok(Outcome {
                table,
                verdict: format!("find-periodic fails (eps {}: {e})", fmt_f64(eps)),
                code: Verdict::Fails.exit_code(),
                plot: None,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn orbit_plot(sys: &SystemDef, orb: &crate::flow::Trajectory) -> (String, String, String, Vec<Series>) {
    let n = 513;
    let pts: Vec<Vec<f64>> = (0..n)
        .filter_map(|i| orb.eval(sys.period * i as f64 / (n - 1) as f64).ok())
        .collect();
    if sys.dim() >= 2 {
        let s = Series { name: "orbit".into(), points: pts.iter().map(|p| (p[0], p[1])).collect() };
        ("Periodic orbit".into(), "x1".into(), "x2".into(), vec![s])
    } else {
        let s = Series {
            name: "orbit".into(),
            points: pts.iter().enumerate().map(|(i, p)| (sys.period * i as f64 / (n - 1) as f64, p[0])).collect(),
        };
        ("Periodic orbit".into(), "t".into(), "x1".into(), vec![s])
    }
}

fn sweep(cfg: &RunConfig) -> CmdResult {
    let sys = cfg.system()?;
    let icfg = cfg.integrator_config();
    let region = cfg.region()?;
    let seed = cfg.periodic_start(&region);
    let strategy = if cfg.periodic.warm_start {
        SeedStrategy::WarmStart(seed.clone())
    } else {
        SeedStrategy::Fixed(seed.clone())
    };
    let reference = match cfg.periodic.reference {
        ReferenceSpec::PeriodicSet => CycleReference::PeriodicSet,
        ReferenceSpec::Cycle => CycleReference::Curve(periodic_cycle(&sys, &cfg.cycle_start(sys.dim()), cfg.tolerances.cycle, &icfg)?),
    };
    let rep = eps_sweep(&sys, &region, &cfg.periodic.eps_list, &strategy, &reference, &icfg, &cfg.shoot_config())?;
    let k = sys.dim();
    let mut table = Table::new(orbit_columns(k, true));
    table.comments.push(format!("seed {seed:?}, reference {:?}", cfg.periodic.reference));
    let mut all_ok = true;
    for SweepEntry { eps, result, membership, boundary_distance, cycle_distance } in &rep.entries {
        let r = result.as_ref().ok();
        all_ok &= r.is_some_and(|r| r.converged) && membership.as_ref().is_some_and(|m| m.in_x);
        if let Err(e) = result {
            table.comments.push(format!("eps {}: {e}", fmt_f64(*eps)));
        }
        table.push(orbit_row(*eps, k, r, membership.as_ref().map(|m| m.in_x), *boundary_distance, Some(*cycle_distance)));
    }
    table.comments.push(format!("log-log slope of dist_to_cycle vs eps: {}", rep.slope.map_or("n/a".into(), fmt_f64)));
    let verdict = if all_ok { Verdict::Holds } else { Verdict::Fails };
    let line = format!(
        "sweep {verdict} ({} eps values, all converged in X: {all_ok}, slope {})",
        rep.entries.len(),
        rep.slope.map_or("n/a".into(), fmt_f64)
    );
    let series = vec![Series {
        name: "dist_to_cycle".into(),
        points: rep
            .entries
            .iter()
            .filter_map(|e| e.cycle_distance.filter(|d| *d > 0.0).map(|d| (e.eps.log10(), d.log10())))
            .collect(),
    }];
    Ok(Outcome {
        table,
        verdict: line,
        code: verdict.exit_code(),
        plot: Some(("Convergence to the cycle".into(), "log10 eps".into(), "log10 distance".into(), series)),
    })
}
