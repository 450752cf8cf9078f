use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use smalltime_core::ldp::SCAN_COLUMNS;

fn smalltime(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smalltime"))
        .args(args)
        .env_remove("SMALLTIME_OUTPUT_DIR")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SCAN: &str = r#"
command = "scan"
seed = 42
workers = 1
[coefficients]
name = "heat-additive"
params = { modes = 4 }
[grid]
n = 16
[solver]
n_steps = 100
[initial]
kind = "zero"
[scan]
kind = "equivalence"
eps = [0.4, 0.2, 0.1, 0.05]
n_paths = 100
calibration_paths = 50
"#;

/// Data rows of a results file, after the comment lines and header.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap()).collect();
    (header, rows)
}

#[test]
fn validate_linear_heat_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", "seed = 1\n[coefficients]\nname = \"linear-heat\"\n");
    let out = smalltime(&["validate", "--config", &cfg, "--output-dir", "out"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("validation passed"));
    let (header, rows) = csv_rows(&tmp.path().join("out/results.csv"));
    assert_eq!(header[0], "subject");
    assert!(rows.iter().all(|r| &r[6] == "true"));
}

#[test]
fn scan_writes_one_row_per_eps_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SCAN);
    for dir in ["a", "b"] {
        let out = smalltime(&["scan", "--config", &cfg, "--output-dir", dir], tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(tmp.path().join("a/results.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/results.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("seed=42"));
    assert!(text.lines().any(|l| l.starts_with("# schema: ldp-scan v1")));
    let (header, rows) = csv_rows(&tmp.path().join("a/results.csv"));
    assert_eq!(header, SCAN_COLUMNS);
    assert_eq!(rows.len(), 4);
    let eps: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(eps, [0.4, 0.2, 0.1, 0.05]);
    for r in &rows {
        let v: f64 = r[7].parse().unwrap();
        assert!(v.is_finite() && v <= 0.0);
    }
    let meta: toml::Table = toml::from_str(&fs::read_to_string(tmp.path().join("a/metadata.toml")).unwrap()).unwrap();
    assert_eq!(meta["run"]["seed"].as_integer(), Some(42));
    assert_eq!(meta["run"]["coefficient_set"].as_str(), Some("heat-additive"));
    assert_eq!(meta["config"]["scan"]["n_paths"].as_integer(), Some(100));
}

#[test]
fn env_var_sets_default_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", "seed = 1\n[coefficients]\nname = \"heat-sin\"\n");
    let out = Command::new(env!("CARGO_BIN_EXE_smalltime"))
        .args(["validate", "--config", &cfg])
        .env("SMALLTIME_OUTPUT_DIR", tmp.path().join("from-env"))
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("from-env/results.csv").exists());
}

#[test]
fn parse_error_reports_line_and_writes_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "seed = 1\n[grid]\nn = 16\nwidth = 3\n");
    let out = smalltime(&["simulate", "--config", &cfg, "--output-dir", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("width") && err.contains("line 4"), "{err}");
    let rec: toml::Table = toml::from_str(&fs::read_to_string(tmp.path().join("out/error.toml")).unwrap()).unwrap();
    assert_eq!(rec["kind"].as_str(), Some("config"));
    assert_eq!(rec["exit_code"].as_integer(), Some(2));
}

#[test]
fn range_and_name_errors_are_config_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        "seed = 1\n[coefficients]\nname = \"nope\"\n",
        "seed = 1\n[grid]\nn = 7\n",
        "seed = 1\n[scan]\nkind = \"equivalence\"\neps = [1.5]\n",
        "seed = 1\n[scan]\nkind = \"equivalence\"\neps = [0.1]\nn_paths = 10\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.toml"), text);
        let out = smalltime(&["scan", "--config", &cfg, "--output-dir", "out"], tmp.path());
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn command_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SCAN);
    let out = smalltime(&["rate", "--config", &cfg, "--output-dir", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unstable_explicit_step_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "seed = 3\n[grid]\nn = 32\n[solver]\nn_steps = 10\nscheme = \"explicit\"\n";
    let cfg = write_config(tmp.path(), "e.toml", text);
    let out = smalltime(&["simulate", "--config", &cfg, "--output-dir", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unstable"));
}

#[test]
fn blowup_is_reported_with_its_own_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
seed = 3
[coefficients]
name = "heat-linear"
params = { scale = 1e4, modes = 1 }
[solver]
n_steps = 100
"#;
    let cfg = write_config(tmp.path(), "b.toml", text);
    let out = smalltime(&["simulate", "--config", &cfg, "--output-dir", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: toml::Table = toml::from_str(&fs::read_to_string(tmp.path().join("out/error.toml")).unwrap()).unwrap();
    assert_eq!(rec["kind"].as_str(), Some("blowup"), "{rec:?}");
}

#[test]
fn simulate_and_rate_write_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = r#"
seed = 5
[coefficients]
name = "quasilinear-sin"
[solver]
n_steps = 200
record_every = 50
[simulate]
eps = 0.5
r = 0.01
"#;
    let cfg = write_config(tmp.path(), "sim.toml", sim);
    let out = smalltime(&["simulate", "--config", &cfg, "--output-dir", "sim"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv_rows(&tmp.path().join("sim/results.csv"));
    assert_eq!(rows.len(), 201);

    let rate = r#"
seed = 0
[coefficients]
name = "heat-additive"
params = { basis = "uniform", modes = 1, decay = 1.000001 }
[initial]
kind = "constant"
amplitude = 0.0
offset = 0.3
[rate]
family = "ramp"
n_ctrl = 10
speed = 1.0
"#;
    let cfg = write_config(tmp.path(), "rate.toml", rate);
    let out = smalltime(&["rate", "--config", &cfg, "--output-dir", "rate"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("rate/results.csv")).unwrap();
    let rate_line = text.lines().find(|l| l.starts_with("# rate=")).unwrap();
    let value: f64 = rate_line["# rate=".len()..].split(',').next().unwrap().parse().unwrap();
    // single mode with q = 1/1.000001: I = q⁻²/2
    approx_eq(value, 0.5 * 1.000001f64.powi(2));
    let (_, rows) = csv_rows(&tmp.path().join("rate/results.csv"));
    assert_eq!(rows.len(), 10);
}

fn approx_eq(a: f64, b: f64) {
    assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}");
}
