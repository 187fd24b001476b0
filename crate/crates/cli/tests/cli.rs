//! End-to-end checks of the command line: exit codes, report files and
//! byte-level determinism.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maxgraph"))
}

fn hyperboloid_scenario(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("hyp.toml");
    std::fs::write(
        &path,
        r#"
name = "hyp_test"

[sigma1]
metric = "euclidean"
dim = 2

[sigma2]
metric = "line"
dim = 1

[graph]
kind = "hyperboloid"

[checks]
names = ["gradient_identity_4_1", "laplacian_identity_3_9", "ricci_bound_4_7"]

[checks.points]
kind = "random_box"
half_width = 1.0
count = 3
seed = 5
"#,
    )
    .unwrap();
    path
}

#[test]
fn list_contains_registry_entries() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["poincare_ball", "laplacian_identity_3_9", "cmc_family"] {
        assert!(text.contains(needle), "missing {needle} in listing");
    }
}

#[test]
fn verify_passes_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = hyperboloid_scenario(dir.path());
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["verify", "--scenario"])
            .arg(&scenario)
            .args(["--seed", "9", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    let a = std::fs::read(out1.join("verify_report.json")).unwrap();
    let b = std::fs::read(out2.join("verify_report.json")).unwrap();
    assert_eq!(a, b, "reports differ between identical runs");
    let csv = std::fs::read_to_string(out1.join("identity_records.csv")).unwrap();
    assert!(csv.lines().count() > 3);
    assert!(csv.starts_with("check,tag,point"));
}

#[test]
fn tolerance_scale_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = hyperboloid_scenario(dir.path());
    let out = bin()
        .args(["verify", "--scenario"])
        .arg(&scenario)
        .args(["--tolerance-scale", "1e-20", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[sigma1]\nmetric = \"euclidean\"\ndim = 2\nwarp = 9\n").unwrap();
    let out = bin()
        .args(["verify", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("unknown.toml");
    std::fs::write(
        &path,
        r#"
[sigma1]
metric = "euclidean"
dim = 2
[sigma2]
metric = "line"
dim = 1
[graph]
kind = "hyperboloid"
[checks]
names = ["flux_capacitor_1_21"]
[checks.points]
kind = "explicit"
points = [[0.0, 0.0]]
"#,
    )
    .unwrap();
    let out = bin()
        .args(["verify", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_torus_and_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("torus.toml");
    std::fs::write(
        &path,
        r#"
[sigma1]
metric = "flat_torus"
dim = 2
[sigma2]
metric = "line"
dim = 1
[graph]
kind = "trig"
seed = 0
amplitude = 0.4
[solver]
domain = "torus"
grid = 24
c = 0.0
seed = 0
"#,
    )
    .unwrap();
    let outdir = dir.path().join("out");
    let out = bin()
        .args(["solve", "--scenario"])
        .arg(&path)
        .args(["--seed", "0", "--out"])
        .arg(&outdir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let rep: serde_json::Value =
        serde_json::from_slice(&std::fs::read(outdir.join("solve_report.json")).unwrap()).unwrap();
    assert!(rep["converged"].as_bool().unwrap());
    assert!(rep["sup_central_gradient"].as_f64().unwrap() < 1e-6);
    let csv = std::fs::read_to_string(outdir.join("solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 24 * 24 + 1);
    assert!(csv.starts_with("x,y,value,grad_x,grad_y"));
}

#[test]
fn solve_interval_recovers_affine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("interval.toml");
    std::fs::write(
        &path,
        r#"
[sigma1]
metric = "line"
dim = 1
[sigma2]
metric = "line"
dim = 1
[graph]
kind = "slice"
[solver]
domain = "interval"
grid = 64
c = 0.0
length = 1.0
left = 0.0
right = 0.5
"#,
    )
    .unwrap();
    let outdir = dir.path().join("out");
    let out = bin()
        .args(["solve", "--scenario"])
        .arg(&path)
        .args(["--out"])
        .arg(&outdir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(outdir.join("solution.csv")).unwrap();
    // one-dimensional maximal graphs are affine: the gradient column is 0.5
    let last = csv.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
    assert!((cols[1] - 0.5).abs() < 1e-12);
    assert!((cols[2] - 0.5).abs() < 1e-10);
}

#[test]
fn family_command_reports_constancy() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["family", "--m", "2", "--c", "1", "--samples", "15", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rep: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("family_report.json")).unwrap())
            .unwrap();
    assert!(rep["scalar_std_dev"].as_f64().unwrap() < 1e-6);
}

#[test]
fn estimates_witness_only_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "estimates",
            "--metric",
            "euclidean",
            "--dim",
            "2",
            "--radius",
            "2",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rep: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("estimates_report.json")).unwrap())
            .unwrap();
    let w = rep["cheeger"][0]["witness_bound"].as_f64().unwrap();
    assert!((w - 1.0).abs() < 1e-9);
}
