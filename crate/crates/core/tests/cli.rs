//! End-to-end runs of the command-line front end through `run_with`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use perturbed_orbits::cli::run_with;
use perturbed_orbits::expr::parse;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(args.iter().map(|s| s.to_string()), &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("porbits-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("e1.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const E1: &str = "seed = 11\n\n[system]\nbuiltin = \"e1-circle\"\n\n[region]\nshape = \"circle\"\ncenter = [0.0, 0.0]\nradius = 1.0\n";

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.is_empty() && !l.starts_with('#')).skip(1).collect()
}

#[test]
fn check_a0_holds_on_the_unit_disk() {
    let dir = scratch("a0");
    let cfg = write_config(&dir, E1);
    let r = run(&["check", "A0", "--config", &cfg, "--set", "grids.a0_samples=64"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.starts_with("A0 holds (max residual "), "{}", r.stderr);
    assert!(r.stdout.starts_with("# porbits "), "{}", r.stdout);
    assert!(r.stdout.contains("# config-sha256: ") && r.stdout.contains("# seed: 11"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn melnikov_csv_has_65_rows_at_the_closed_form() {
    let dir = scratch("mel");
    let cfg = write_config(&dir, E1);
    let out = dir.join("m.csv");
    let r = run(&["melnikov", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("A3_1 holds"), "{}", r.stdout);
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 65);
    let exact = -0.4 * ((4.0 * std::f64::consts::PI).exp() - 1.0);
    for row in rows {
        let m: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(((m - exact) / exact).abs() <= 1e-6, "{row}");
    }
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn missing_config_names_the_path() {
    let r = run(&["check", "A0", "--config", "/no/such/dir/e1.cfg"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("/no/such/dir/e1.cfg"), "{}", r.stderr);
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(run(&["check", "A9"]).code, 1);
    assert_eq!(run(&["frobnicate"]).code, 1);
    assert_eq!(run(&["melnikov", "--set", "grids.unknown_key=3"]).code, 1);
    let dir = scratch("bad");
    let cfg = write_config(&dir, "[system]\nphi = [\"1 +\", \"0\"]\npsi = [\"0\", \"0\"]\n");
    let r = run(&["check", "A0", "--config", &cfg]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = scratch("det");
    let cfg = write_config(&dir, E1);
    let mut files = Vec::new();
    for k in 0..2 {
        let out = dir.join(format!("sweep-{k}.csv"));
        let r = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let other = dir.join("sweep-other.csv");
    run(&["sweep", "--config", &cfg, "--set", "seed=12", "--out", other.to_str().unwrap()]);
    assert_ne!(std::fs::read(&other).unwrap(), files[0], "seed is recorded in the header");
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn svg_is_valid_xml_with_one_polyline_per_series() {
    let dir = scratch("svg");
    let cfg = write_config(&dir, "[system]\nbuiltin = \"e3-scalar\"\n");
    let svg_path = dir.join("v.svg");
    let r = run(&[
        "verify-cauchy",
        "--config",
        &cfg,
        "--set",
        "average.eps=[0.02, 0.01]",
        "--plot",
        svg_path.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = std::fs::read_to_string(&svg_path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(doc.root_element().attribute("version"), Some("1.1"));
    let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(lines, 2);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn describe_prints_fields_and_divergence() {
    let r = run(&["describe", "e1-circle"]);
    assert_eq!(r.code, 0);
    let line = r.stdout.lines().find(|l| l.starts_with("Sp psi' = ")).unwrap();
    let div = parse(line.trim_start_matches("Sp psi' = ")).unwrap();
    let reference = parse("2*(1 - x1^2 - x2^2) - 2*(x1^2 + x2^2)").unwrap();
    for p in [[0.3, -0.2], [1.0, 0.0], [0.6, 0.8], [-1.1, 0.4]] {
        let a = div.eval(0.0, &p, &BTreeMap::new()).unwrap();
        let b = reference.eval(0.0, &p, &BTreeMap::new()).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }
    let r = run(&["describe", "e2-resonance"]);
    assert!(r.stdout.contains("Sp psi' = 0"), "{}", r.stdout);
    assert!(r.stdout.contains("lam = 1"), "{}", r.stdout);
    assert_eq!(run(&["describe", "e9-missing"]).code, 1);
}

#[test]
fn vanishing_field_is_inconclusive() {
    // The defect of the circle system vanishes on the unit circle, so no degree exists.
    let r = run(&["check", "A2", "--set", "degree.s=0.0"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("A2 inconclusive"), "{}", r.stderr);
}
