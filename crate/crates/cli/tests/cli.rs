use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forchheimer::harness::raster::read_raster;
use forchheimer::harness::RunManifest;

fn forch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "core", "scenarios", name]
        .iter()
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("case.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
id = "small"
[grid]
nx = 8
ny = 8
[law]
exponents = [0.0, 1.0]
coefficients = ["1 + 0.5*x", 1.0]
[porosity]
field = 0.5
[boundary]
psi = "0.1*sin(t)"
[time]
t_end = 2.0
dt = 0.05
snapshot_every = 2
"#;

#[test]
fn zero_data_gives_zero_snapshots_and_zero_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = forch(&[
        "simulate",
        "--config",
        scenario("zero.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = RunManifest::read(&out).unwrap();
    assert!(m.completed);
    for s in &m.snapshots {
        assert_eq!(read_raster(&out.join(&s.file)).unwrap().max_abs(), 0.0);
    }
    let o = forch(&["bounds", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("bounds.json")).unwrap()).unwrap();
    for e in b["report"]["entries"].as_array().unwrap() {
        for p in e["points"].as_array().unwrap() {
            assert_eq!(p["lhs"].as_f64().unwrap(), 0.0, "{}", e["id"]);
        }
    }
}

#[test]
fn malformed_exponents_exit_two_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("[0.0, 1.0]", "[1.0, 0.5]"));
    let o = forch(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("law.exponents"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SMALL.replace("[porosity]", "[porosity]\nbogus = 1"),
    );
    let o = forch(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn picard_failure_exits_three_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let text =
        SMALL.replace("0.1*sin(t)", "50*sin(t)") + "picard_max_iter = 1\npicard_tol = 1e-14\n";
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("r");
    let o = forch(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(out.join("failure.json").exists());
    assert!(!RunManifest::read(&out).unwrap().completed);
}

#[test]
fn darcy_eigenmode_snapshots_decay_exponentially() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = forch(&[
        "simulate",
        "--config",
        scenario("darcy_eigen.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = RunManifest::read(&out).unwrap();
    let first = read_raster(&out.join(&m.snapshots[0].file)).unwrap();
    for s in &m.snapshots[1..] {
        let p = read_raster(&out.join(&s.file)).unwrap();
        let exact = first.map(|v| v * (-2.0 * PI * PI * s.time).exp()).unwrap();
        let err = p.zip_map(&exact, |a, b| a - b).unwrap().max_abs();
        assert!(err <= 1e-3, "t = {}: error {err}", s.time);
    }
}

#[test]
fn verify_without_targets_exits_two() {
    let o = forch(&["verify"]);
    assert_eq!(o.status.code(), Some(2));
    let o = forch(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_all_is_byte_identical_across_runs() {
    let a = forch(&["verify", "all", "--seed", "7"]);
    let b = forch(&["verify", "all", "--seed", "7"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["seed"], 7);
}

#[test]
fn bounds_on_missing_snapshot_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    assert!(forch(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    std::fs::remove_file(out.join("snapshots/p_00003.frst")).unwrap();
    let o = forch(&["bounds", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = forch(&["bounds", tmp.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_on_darcy_run_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SMALL
            .replace("[0.0, 1.0]", "[0.0]")
            .replace(r#"["1 + 0.5*x", 1.0]"#, "[1.0]"),
    );
    let out = tmp.path().join("run");
    let o = forch(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = forch(&["bounds", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("law.exponents"));
}

#[test]
fn run_directory_lists_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    assert!(forch(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--plot-csv"
    ])
    .status
    .success());
    let o = forch(&["bounds", out.to_str().unwrap(), "--plot-csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = RunManifest::read(&out).unwrap();
    m.check(&out).unwrap();
    for f in [
        "bounds.json",
        "bounds/data.csv",
        "p_final.csv",
        "steps.json",
        "summary.json",
    ] {
        assert!(m.artifacts.iter().any(|a| a == f), "{f} not listed");
    }
    assert_eq!(m.snapshots.len(), 21);
    let o = forch(&["report", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("run small"));
}

#[test]
fn single_point_sweep_matches_a_plain_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let sw = tmp.path().join("sweep");
    let o = forch(&[
        "--jobs",
        "1",
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--axis",
        "amplitude",
        "--values",
        "1",
        "--out",
        sw.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = tmp.path().join("run");
    assert!(forch(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        run.to_str().unwrap()
    ])
    .status
    .success());
    assert!(forch(&["bounds", run.to_str().unwrap()]).status.success());
    let sweep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sw.join("sweep.json")).unwrap()).unwrap();
    let child = sw.join(sweep["children"][0]["dir"].as_str().unwrap());
    let a = std::fs::read(child.join("bounds.json")).unwrap();
    let b = std::fs::read(run.join("bounds.json")).unwrap();
    assert_eq!(a, b);
    assert!(sw.join("fitted_c.csv").exists());
    let o = forch(&["report", sw.to_str().unwrap()]);
    assert!(o.status.success());
    let o = forch(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--axis",
        "colour",
        "--values",
        "1",
        "--out",
        sw.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
