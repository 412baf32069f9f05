//! Run directories: `config.toml`, `manifest.json`, `snapshots/p_NNNNN.frst`,
//! `steps.json`, `summary.json`, and after `bounds`, `bounds.json` plus one
//! CSV per bound under `bounds/`.

use std::path::Path;

use serde::Serialize;

use crate::bounds::{BoundReport, BoundsContext, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::solver::{run, RunOutput, RunSummary, Scenario, StepRecord};

use super::config::{BoundParameters, ExponentsSection, ScenarioConfig};
use super::manifest::{module_versions, sha256_hex, RunManifest, SnapshotEntry, CONFIG_FILE};
use super::raster::{read_raster, to_csv, write_raster};

pub const BOUNDS_FILE: &str = "bounds.json";

#[derive(Debug)]
pub struct SimulateOutcome {
    pub manifest: RunManifest,
    pub summary: RunSummary,
    /// Snapshots and step records; `output.failure` is set if a step failed.
    pub output: RunOutput,
}

#[derive(Debug, Serialize)]
struct FailureRecord<'a> {
    schema_version: u32,
    error: String,
    completed_steps: usize,
    last_time: f64,
    kind: &'a str,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Validates the config, runs the solver and writes the run directory.
/// Only validation and I/O problems are returned as errors; a step failure
/// is recorded in the outcome and the manifest.
pub fn simulate(
    cfg: &ScenarioConfig,
    out: &Path,
    seed: u64,
    plot_csv: bool,
) -> Result<SimulateOutcome> {
    let sc = cfg.scenario()?;
    let advisories = cfg.advisories(&sc.law);
    let text = cfg.to_toml()?;
    let output = run(&sc)?;
    std::fs::create_dir_all(out.join("snapshots"))?;
    std::fs::write(out.join(CONFIG_FILE), &text)?;

    let mut manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        scenario_id: cfg.id.clone(),
        config_file: CONFIG_FILE.into(),
        config_hash: sha256_hex(text.as_bytes()),
        seed,
        completed: output.is_complete(),
        failure: output.failure.as_ref().map(|e| e.to_string()),
        advisories,
        snapshots: Vec::new(),
        artifacts: Vec::new(),
        module_versions: module_versions(),
    };
    for (index, (&time, p)) in output.p.times().iter().zip(output.p.slices()).enumerate() {
        let file = format!("snapshots/p_{index:05}.frst");
        write_raster(&out.join(&file), p)?;
        manifest.snapshots.push(SnapshotEntry { index, time, file });
    }
    write_json(&out.join("steps.json"), &output.steps)?;
    manifest.add_artifact("steps.json");
    let summary = output.summary();
    write_json(&out.join("summary.json"), &summary)?;
    manifest.add_artifact("summary.json");
    if plot_csv {
        let last = output.p.len() - 1;
        std::fs::write(out.join("p_final.csv"), to_csv(output.p.slice(last)))?;
        std::fs::write(out.join("pbar_final.csv"), to_csv(output.pbar.slice(last)))?;
        let mut energy = String::from("t,energy,picard_iterations,cg_iterations\n");
        for s in &output.steps {
            energy.push_str(&format!(
                "{:e},{:e},{},{}\n",
                s.time, s.energy, s.picard_iterations, s.cg_iterations
            ));
        }
        std::fs::write(out.join("steps.csv"), energy)?;
        for f in ["p_final.csv", "pbar_final.csv", "steps.csv"] {
            manifest.add_artifact(f);
        }
    }
    if let Some(e) = &output.failure {
        let rec = FailureRecord {
            schema_version: SCHEMA_VERSION,
            error: e.to_string(),
            completed_steps: output.steps.len(),
            last_time: output.steps.last().map_or(0.0, |s| s.time),
            kind: "numeric",
        };
        write_json(&out.join("failure.json"), &rec)?;
        manifest.add_artifact("failure.json");
    }
    manifest.write(out)?;
    Ok(SimulateOutcome {
        manifest,
        summary,
        output,
    })
}

#[derive(Debug)]
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    pub output: RunOutput,
}

/// Reads a run directory back, checking the manifest first.
pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest = RunManifest::read(dir)?;
    manifest.check(dir)?;
    let text = std::fs::read_to_string(dir.join(&manifest.config_file))?;
    let config = ScenarioConfig::parse(&text)?;
    let scenario = config.scenario()?;
    if manifest.snapshots.is_empty() || manifest.snapshots[0].time != 0.0 {
        return Err(Error::MissingArtifact("initial snapshot missing".into()));
    }
    let snaps = manifest
        .snapshots
        .iter()
        .map(|s| read_raster(&dir.join(&s.file)))
        .collect::<Result<Vec<Field>>>()?;
    let times = manifest.snapshots.iter().map(|s| s.time).collect();
    let steps: Vec<StepRecord> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("steps.json"))?)?;
    let failure = manifest
        .failure
        .as_ref()
        .map(|m| Error::MissingArtifact(format!("run stopped early: {m}")));
    let output = RunOutput::from_snapshots(&scenario, times, snaps, steps, failure)?;
    Ok(LoadedRun {
        manifest,
        config,
        scenario,
        output,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsFile {
    pub schema_version: u32,
    pub scenario_id: String,
    pub config_hash: String,
    pub parameters: BoundParameters,
    pub report: BoundReport,
}

/// Evaluates every bound on a loaded run.
pub fn evaluate_bounds(loaded: &LoadedRun, window: Option<f64>) -> Result<BoundsFile> {
    Ok(evaluate_with_data(loaded, window)?.0)
}

fn evaluate_with_data(loaded: &LoadedRun, window: Option<f64>) -> Result<(BoundsFile, String)> {
    if loaded.scenario.law.is_darcy() {
        return Err(Error::validation(
            "law.exponents",
            "bounds need a law with at least two terms",
        ));
    }
    if !loaded.output.is_complete() {
        return Err(Error::MissingArtifact(
            "run stopped early; bounds need the full horizon".into(),
        ));
    }
    let mut parameters = loaded
        .config
        .bound_parameters(&loaded.scenario, loaded.manifest.seed)?;
    if let Some(w) = window {
        if !(w > 0.0) {
            return Err(Error::validation("window", "must be positive"));
        }
        parameters.window = w;
    }
    let ctx = BoundsContext::new(
        &loaded.scenario,
        &loaded.output,
        parameters.pack,
        parameters.c2,
        parameters.window,
    )?;
    let report = ctx.evaluate()?;
    let d = ctx.data();
    let mut data = String::from("t,g,g1,majorant\n");
    for (k, t) in d.g.times.iter().enumerate() {
        data.push_str(&format!(
            "{:e},{:e},{:e},{:e}\n",
            t, d.g.values[k], d.g1.values[k], d.majorant.values[k]
        ));
    }
    let file = BoundsFile {
        schema_version: SCHEMA_VERSION,
        scenario_id: loaded.manifest.scenario_id.clone(),
        config_hash: loaded.manifest.config_hash.clone(),
        parameters,
        report,
    };
    Ok((file, data))
}

/// Loads the run, evaluates the bounds and writes `bounds.json` and the
/// per-bound CSVs into the run directory, listing them in the manifest.
/// `exponents` replaces the run's own `[exponents]` section when given.
pub fn bounds_for_run(
    dir: &Path,
    exponents: Option<&ExponentsSection>,
    window: Option<f64>,
    plot_csv: bool,
) -> Result<BoundsFile> {
    let mut loaded = load_run(dir)?;
    if let Some(e) = exponents {
        loaded.config.exponents = e.clone();
    }
    let (file, data) = evaluate_with_data(&loaded, window)?;
    let mut manifest = loaded.manifest;
    write_json(&dir.join(BOUNDS_FILE), &file)?;
    manifest.add_artifact(BOUNDS_FILE);
    std::fs::create_dir_all(dir.join("bounds"))?;
    for e in &file.report.entries {
        let rel = format!("bounds/{}.csv", e.id);
        std::fs::write(dir.join(&rel), e.to_csv())?;
        manifest.add_artifact(&rel);
    }
    if plot_csv {
        std::fs::write(dir.join("bounds/data.csv"), data)?;
        manifest.add_artifact("bounds/data.csv");
    }
    manifest.write(dir)?;
    Ok(file)
}
