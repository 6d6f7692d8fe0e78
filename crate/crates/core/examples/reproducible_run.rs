//! Drive the command-line front end in-process: run a subcommand twice with
//! the same configuration and compare the CSV bytes.
//!
//! cargo run --release --example reproducible_run

use perturbed_orbits::cli::run_with;

fn main() {
    let dir = std::env::temp_dir().join(format!("porbits-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 7\n\n[system]\nbuiltin = \"e1-circle\"\n\n[grids]\ntheta_points = 9\n",
    )
    .expect("write config");

    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.join(format!("melnikov-{k}.csv"));
        let argv = ["melnikov", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
        let code = run_with(argv.iter().map(|s| s.to_string()), &mut stdout, &mut stderr);
        print!("run {k}: exit {code}, {}", String::from_utf8_lossy(&stdout));
        outputs.push(std::fs::read(&out).expect("csv written"));
    }
    println!("byte-identical: {}", outputs[0] == outputs[1]);
    println!("\n{}", String::from_utf8_lossy(&outputs[0]));

    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = run_with(
        ["check", "A0", "--config", "/nonexistent/run.toml"].iter().map(|s| s.to_string()),
        &mut stdout,
        &mut stderr,
    );
    print!("missing config: exit {code}, {}", String::from_utf8_lossy(&stderr));
    std::fs::remove_dir_all(&dir).ok();
}
