//! End-to-end tests of the `senbd` binary: config handling, file outputs,
//! determinism, and error categories.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_senbd"))
}

struct Workdir(PathBuf);

impl Workdir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("senbd-cli-{tag}-{}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        std::fs::create_dir_all(&dir).unwrap();
        Workdir(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let path = self.path(name);
        std::fs::write(&path, content).unwrap();
        path
    }
}

impl Drop for Workdir {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.0).ok();
    }
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn json_at(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap()
}

const SINGLE_LINE_MODEL: &str = r#"
[run]
seed = 42

[model]
family = "se-nbd"
baseline_mean = [1.0]
dispersion_shape = [2.0]
decay = [0.5]
sector_names = ["only"]

[[model.edges]]
target = 0
source = 0
s = 0.5
"#;

#[test]
fn synth_round_trips_and_is_deterministic() {
    let dir = Workdir::new("synth");
    let config = format!(
        "{SINGLE_LINE_MODEL}\n[synth]\nhorizon = 40\noutput = \"{}\"\n",
        dir.path("a.csv").display()
    );
    let config_path = dir.write("run.toml", &config);
    run_ok(&["synth", "-c", config_path.to_str().unwrap(), "-o", dir.path("a.json").to_str().unwrap()]);
    run_ok(&[
        "synth",
        "-c",
        config_path.to_str().unwrap(),
        "--data-out",
        dir.path("b.csv").to_str().unwrap(),
        "-o",
        dir.path("b.json").to_str().unwrap(),
    ]);
    // Same seed: byte-identical data.
    assert_eq!(read(&dir.path("a.csv")), read(&dir.path("b.csv")));
    // Different seed: different data.
    run_ok(&[
        "synth",
        "-c",
        config_path.to_str().unwrap(),
        "--seed",
        "43",
        "--data-out",
        dir.path("c.csv").to_str().unwrap(),
        "-o",
        dir.path("c.json").to_str().unwrap(),
    ]);
    assert_ne!(read(&dir.path("a.csv")), read(&dir.path("c.csv")));
    // Document embeds tool version and resolved config.
    let doc = json_at(&dir.path("a.json"));
    assert_eq!(doc["tool"]["name"], "senbd");
    assert_eq!(doc["tool"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["config"]["run"]["seed"], 42);
    assert_eq!(doc["command"], "synth");
}

#[test]
fn synth_horizon_zero_writes_header_only() {
    let dir = Workdir::new("h0");
    let config = format!(
        "{SINGLE_LINE_MODEL}\n[synth]\nhorizon = 0\noutput = \"{}\"\n",
        dir.path("empty.csv").display()
    );
    let config_path = dir.write("run.toml", &config);
    run_ok(&["synth", "-c", config_path.to_str().unwrap(), "-o", dir.path("d.json").to_str().unwrap()]);
    assert_eq!(read(&dir.path("empty.csv")), "period,only\n");
}

#[test]
fn simulate_rejects_nonstationary_with_category() {
    let dir = Workdir::new("nonstat");
    let config = r#"
[run]
seed = 1

[model]
family = "se-nbd"
baseline_mean = [1.0]
dispersion_shape = [1.0]
decay = [0.5]

[[model.edges]]
target = 0
source = 0
s = 1.2

[simulate]
horizon = 10
"#;
    let config_path = dir.write("run.toml", config);
    let out = bin()
        .args(["simulate", "-c", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().next().unwrap();
    assert!(line.starts_with("error: nonstationary:"), "{stderr}");
    // The override flag unblocks it.
    let out = bin()
        .args([
            "simulate",
            "-c",
            config_path.to_str().unwrap(),
            "--allow-nonstationary",
            "-o",
            dir.path("sim.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn impact_single_line_closed_form_total() {
    // M0/L0 = 0.25 with r = 0.5: total impact 1.0.
    let dir = Workdir::new("impact");
    let config = format!(
        "{SINGLE_LINE_MODEL}\n[impact]\noutput = \"{}\"\n",
        dir.path("impact.csv").display()
    );
    let config_path = dir.write("run.toml", &config);
    run_ok(&["impact", "-c", config_path.to_str().unwrap(), "-o", dir.path("impact.json").to_str().unwrap()]);
    let doc = json_at(&dir.path("impact.json"));
    let total = doc["results"]["totals"][0].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-9, "total {total}");
    let csv = read(&dir.path("impact.csv"));
    assert!(csv.lines().any(|l| l == "only,total,1"), "{csv}");
}

#[test]
fn network_exports_edges() {
    let dir = Workdir::new("network");
    let config = format!(
        "{SINGLE_LINE_MODEL}\n[network]\noutput = \"{}\"\n",
        dir.path("edges.csv").display()
    );
    let config_path = dir.write("run.toml", &config);
    run_ok(&["network", "-c", config_path.to_str().unwrap(), "-o", dir.path("net.json").to_str().unwrap()]);
    assert_eq!(read(&dir.path("edges.csv")), "source,target,weight\nonly,only,0.5\n");
    let doc = json_at(&dir.path("net.json"));
    assert_eq!(doc["results"]["edge_count"], 1);
    assert_eq!(doc["results"]["steady"], true);
}

#[test]
fn fit_is_deterministic_across_thread_counts() {
    let dir = Workdir::new("threads");
    let data = dir.path("data.csv");
    let config = format!(
        "{SINGLE_LINE_MODEL}\n[synth]\nhorizon = 300\noutput = \"{}\"\n[fit]\ninput = \"{}\"\nfamily = \"se-nbd\"\nmultistart = 4\nmax_iterations = 200\n",
        data.display(),
        data.display()
    );
    let config_path = dir.write("run.toml", &config);
    run_ok(&["synth", "-c", config_path.to_str().unwrap(), "-o", dir.path("s.json").to_str().unwrap()]);
    run_ok(&[
        "fit",
        "-c",
        config_path.to_str().unwrap(),
        "--threads",
        "1",
        "-o",
        dir.path("fit1.json").to_str().unwrap(),
    ]);
    run_ok(&[
        "fit",
        "-c",
        config_path.to_str().unwrap(),
        "--threads",
        "4",
        "-o",
        dir.path("fit4.json").to_str().unwrap(),
    ]);
    assert_eq!(read(&dir.path("fit1.json")), read(&dir.path("fit4.json")));
}

#[test]
fn aic_table_emits_five_sorted_rows() {
    let dir = Workdir::new("aic");
    let data = dir.path("data.csv");
    let config = format!(
        "{SINGLE_LINE_MODEL}\n[synth]\nhorizon = 400\noutput = \"{d}\"\n[aic_table]\ninput = \"{d}\"\nmultistart = 4\nmax_iterations = 250\noutput = \"{t}\"\n",
        d = data.display(),
        t = dir.path("aic.csv").display()
    );
    let config_path = dir.write("run.toml", &config);
    run_ok(&["synth", "-c", config_path.to_str().unwrap(), "-o", dir.path("s.json").to_str().unwrap()]);
    run_ok(&["aic-table", "-c", config_path.to_str().unwrap(), "-o", dir.path("a.json").to_str().unwrap()]);
    let table = read(&dir.path("aic.csv"));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "family,aic,log_likelihood,n_params,status");
    assert_eq!(lines.len(), 6, "{table}");
    let aics: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(aics.windows(2).all(|w| w[0] <= w[1]), "{aics:?}");
    for family in ["md-se-nbd", "md-hawkes", "se-nbd", "hawkes", "nbd"] {
        assert!(lines[1..].iter().any(|l| l.starts_with(family)), "{family} missing");
    }
}

#[test]
fn corr_theory_columns_agree() {
    let dir = Workdir::new("corr");
    let config = format!(
        r#"
[corr]
max_lag = 5
output = "{}"

[corr.kernel]
amplitude = 0.5
rate = 1.0
overdispersion = 1.0
baseline = 1.0
"#,
        dir.path("corr.csv").display()
    );
    let config_path = dir.write("run.toml", &config);
    run_ok(&["corr", "-c", config_path.to_str().unwrap(), "-o", dir.path("corr.json").to_str().unwrap()]);
    let doc = json_at(&dir.path("corr.json"));
    let closed = doc["results"]["closed_form"].as_array().unwrap();
    let solved = doc["results"]["integral_equation"].as_array().unwrap();
    assert_eq!(closed.len(), 6);
    for (c, s) in closed.iter().zip(solved) {
        let (c, s) = (c.as_f64().unwrap(), s.as_f64().unwrap());
        assert!((c - s).abs() < 1e-3, "closed {c} vs solved {s}");
    }
    // Empirical column absent without input data.
    assert!(doc["results"]["empirical"].is_null());
    let csv = read(&dir.path("corr.csv"));
    assert!(csv.starts_with("lag,empirical,closed_form,integral_equation\n0,,"), "{csv}");
}

#[test]
fn branching_reports_extinction_and_curve() {
    let dir = Workdir::new("branching");
    let config = format!(
        r#"
[run]
seed = 7

[branching]
kind = "poisson"
mean = 2.0
epsilons = [0.001, 0.0001]
output = "{}"
"#,
        dir.path("curve.csv").display()
    );
    let config_path = dir.write("run.toml", &config);
    run_ok(&["branching", "-c", config_path.to_str().unwrap(), "-o", dir.path("b.json").to_str().unwrap()]);
    let doc = json_at(&dir.path("b.json"));
    let extinction = doc["results"]["extinction_probability"].as_f64().unwrap();
    assert!((extinction - 0.203188).abs() < 1e-5);
    // Supercritical law: no finite progeny mean.
    assert!(doc["results"]["total_progeny_mean"].is_null());
    let csv = read(&dir.path("curve.csv"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn data_errors_carry_coordinates() {
    let dir = Workdir::new("baddata");
    let data = dir.write("bad.csv", "a,b\n1,2\n1,2.5\n");
    let config = format!(
        "[run]\nseed = 1\n[fit]\ninput = \"{}\"\nfamily = \"nbd\"\n",
        data.display()
    );
    let config_path = dir.write("run.toml", &config);
    let out = bin()
        .args(["fit", "-c", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: data:"), "{stderr}");
    assert!(stderr.contains("non-integer count"), "{stderr}");
    assert!(stderr.contains("row 3"), "{stderr}");
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = Workdir::new("noseed");
    let config = format!(
        "[model]\nfamily = \"nbd\"\nbaseline_mean = [1.0]\ndispersion_shape = [1.0]\ndecay = [0.0]\n[synth]\nhorizon = 5\noutput = \"{}\"\n",
        dir.path("x.csv").display()
    );
    let config_path = dir.write("run.toml", &config);
    let out = bin()
        .args(["synth", "-c", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: config:"), "{stderr}");
    assert!(stderr.contains("seed"), "{stderr}");
}

#[test]
fn unknown_subcommand_fails() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
}
