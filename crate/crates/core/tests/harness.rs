use std::path::{Path, PathBuf};

use forchheimer::harness::{evaluate_bounds, load_run, simulate, BoundsFile, ScenarioConfig};
use forchheimer::{BoundsContext, Error};
use serde_json::{json, Value};

const BASELINE_TOL: f64 = 1e-6;
/// Every `STRIDE`-th point of each ratio series is archived.
const STRIDE: usize = 10;

fn scenario(name: &str) -> ScenarioConfig {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", name]
        .iter()
        .collect();
    ScenarioConfig::load(&p).unwrap()
}

fn small() -> ScenarioConfig {
    let mut c = scenario("heterogeneous.toml");
    c.grid.nx = 12;
    c.grid.ny = 12;
    c.time.t_end = 3.0;
    c.time.dt = 0.05;
    c.time.snapshot_every = 2;
    c
}

#[test]
fn run_directory_round_trips_bit_for_bit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small();
    let o = simulate(&cfg, tmp.path(), 3, false).unwrap();
    let loaded = load_run(tmp.path()).unwrap();
    assert_eq!(loaded.config, cfg);
    for (a, b) in loaded
        .output
        .pbar_t
        .slices()
        .iter()
        .zip(o.output.pbar_t.slices())
    {
        assert_eq!(a.values(), b.values());
    }
    let from_disk = evaluate_bounds(&loaded, None).unwrap();
    let sc = cfg.scenario().unwrap();
    let params = cfg.bound_parameters(&sc, 3).unwrap();
    let ctx = BoundsContext::new(&sc, &o.output, params.pack, params.c2, params.window).unwrap();
    let in_memory = ctx.evaluate().unwrap();
    assert_eq!(
        serde_json::to_string(&from_disk.report).unwrap(),
        serde_json::to_string(&in_memory).unwrap()
    );
}

#[test]
fn tampered_config_is_detected() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(&small(), tmp.path(), 0, false).unwrap();
    let p = tmp.path().join("config.toml");
    let text = std::fs::read_to_string(&p).unwrap();
    std::fs::write(&p, text.replace("t_end = 3.0", "t_end = 2.0")).unwrap();
    assert!(matches!(
        load_run(tmp.path()),
        Err(Error::MissingArtifact(_))
    ));
}

fn summarize(b: &BoundsFile) -> Value {
    let entries: serde_json::Map<String, Value> = b
        .report
        .entries
        .iter()
        .map(|e| {
            let ratios: Vec<Value> = e
                .points
                .iter()
                .step_by(STRIDE)
                .map(|p| json!([p.t, p.ratio]))
                .collect();
            (
                e.id.clone(),
                json!({ "fitted_c": e.fitted_c, "ratios": ratios }),
            )
        })
        .collect();
    json!({ "scenario_id": b.scenario_id, "entries": entries })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= BASELINE_TOL * a.abs().max(b.abs()).max(1e-300)
}

fn check_baseline(name: &str, file: &Path) {
    let tmp = tempfile::tempdir().unwrap();
    let o = simulate(&scenario(name), tmp.path(), 0, false).unwrap();
    assert!(o.summary.completed && o.summary.max_principle_holds);
    let got = summarize(&evaluate_bounds(&load_run(tmp.path()).unwrap(), None).unwrap());
    if std::env::var_os("FORCH_BLESS").is_some() {
        std::fs::write(file, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
        return;
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
    let (w, g) = (
        want["entries"].as_object().unwrap(),
        got["entries"].as_object().unwrap(),
    );
    assert_eq!(w.keys().collect::<Vec<_>>(), g.keys().collect::<Vec<_>>());
    for (id, we) in w {
        let ge = &g[id];
        let (wc, gc) = (
            we["fitted_c"].as_f64().unwrap(),
            ge["fitted_c"].as_f64().unwrap(),
        );
        assert!(close(wc, gc), "{id}: fitted C {gc} vs baseline {wc}");
        let (wr, gr) = (
            we["ratios"].as_array().unwrap(),
            ge["ratios"].as_array().unwrap(),
        );
        assert_eq!(wr.len(), gr.len(), "{id}");
        for (a, b) in wr.iter().zip(gr) {
            let (ta, ra) = (a[0].as_f64().unwrap(), a[1].as_f64().unwrap());
            let (tb, rb) = (b[0].as_f64().unwrap(), b[1].as_f64().unwrap());
            assert_eq!(ta, tb);
            assert!(
                close(ra, rb),
                "{id} at t = {ta}: ratio {rb} vs baseline {ra}"
            );
        }
    }
}

#[test]
fn heterogeneous_ratios_match_baseline() {
    let file: PathBuf = [
        env!("CARGO_MANIFEST_DIR"),
        "tests",
        "baselines",
        "heterogeneous.json",
    ]
    .iter()
    .collect();
    check_baseline("heterogeneous.toml", &file);
}
