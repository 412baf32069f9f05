use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{fitted_c_spread, BoundEntry, BoundReport, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::solver::{RunSummary, Source};

use super::config::{ExponentsSection, ScenarioConfig};
use super::manifest::RunManifest;
use super::rundir::{bounds_for_run, simulate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Amplitude,
    Grid,
    Dt,
    Contrast,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(Axis::Amplitude),
            "grid" => Ok(Axis::Grid),
            "dt" => Ok(Axis::Dt),
            "contrast" => Ok(Axis::Contrast),
            other => Err(Error::validation(
                "axis",
                format!("`{other}` is not one of amplitude, grid, dt, contrast"),
            )),
        }
    }
}

impl Axis {
    pub fn apply(self, cfg: &mut ScenarioConfig, v: f64) -> Result<()> {
        match self {
            Axis::Amplitude => cfg.boundary.amplitude = v,
            Axis::Dt => cfg.time.dt = v,
            Axis::Contrast => cfg.law.contrast = v,
            Axis::Grid => {
                if !(v >= 2.0 && v.fract() == 0.0) {
                    return Err(Error::validation(
                        "axis",
                        format!("grid size must be an integer >= 2, got {v}"),
                    ));
                }
                cfg.grid.nx = v as usize;
                cfg.grid.ny = v as usize;
            }
        }
        Ok(())
    }
}

/// All ratios finite, and the largest ratio in the second half of `[s, t]`
/// at most twice the largest in the first half.
pub fn ratio_series_bounded(entry: &BoundEntry, s: f64, t: f64) -> Option<bool> {
    let mid = 0.5 * (s + t);
    let first = entry.max_ratio_in(s, mid)?;
    let second = entry.max_ratio_in(mid, t)?;
    let finite = entry
        .points
        .iter()
        .filter(|p| p.t >= s && p.t <= t)
        .all(|p| p.ratio.is_finite());
    Some(finite && second <= 2.0 * first)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepChild {
    pub value: f64,
    pub dir: String,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    /// Max-norm error at the final time against the exact solution (manufactured runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds_skipped: Option<String>,
    pub fitted_c: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FittedCRow {
    pub id: String,
    pub values: Vec<Option<f64>>,
    /// max / min over the children with a positive fitted constant.
    pub spread: Option<f64>,
    /// Per child, see [`ratio_series_bounded`] over `[1, t_end]`.
    pub bounded: Vec<Option<bool>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub error: f64,
    /// Error of the previous (coarser) row divided by this one.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub scenario_id: String,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seed: u64,
    pub children: Vec<SweepChild>,
    pub fitted_c: Vec<FittedCRow>,
    pub convergence: Vec<ConvergenceRow>,
    pub failures: Vec<String>,
    #[serde(skip)]
    pub reports: Vec<Option<BoundReport>>,
}

impl SweepReport {
    pub fn row(&self, id: &str) -> Option<&FittedCRow> {
        self.fitted_c.iter().find(|r| r.id == id)
    }

    pub fn fitted_c_csv(&self) -> String {
        fitted_c_csv(&self.values, &self.fitted_c)
    }
}

/// One row per bound, one column per sweep value, then the spread.
pub fn fitted_c_csv(values: &[f64], rows: &[FittedCRow]) -> String {
    let mut s = String::from("id");
    for v in values {
        s.push_str(&format!(",{v}"));
    }
    s.push_str(",spread\n");
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
    for r in rows {
        s.push_str(&r.id);
        for v in &r.values {
            s.push(',');
            s.push_str(&cell(*v));
        }
        s.push(',');
        s.push_str(&cell(r.spread));
        s.push('\n');
    }
    s
}

fn child_dir_name(axis: Axis, index: usize) -> String {
    let name = serde_json::to_value(axis)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    format!("{name}_{index:02}")
}

fn run_child(
    cfg: &ScenarioConfig,
    value: f64,
    dir: &Path,
    rel: String,
    seed: u64,
    window: Option<f64>,
    plot_csv: bool,
) -> (SweepChild, Option<BoundReport>) {
    let mut child = SweepChild {
        value,
        dir: rel,
        completed: false,
        failure: None,
        summary: None,
        max_error: None,
        bounds_skipped: None,
        fitted_c: BTreeMap::new(),
    };
    let outcome = match simulate(cfg, dir, seed, plot_csv) {
        Ok(o) => o,
        Err(e) => {
            child.failure = Some(e.to_string());
            return (child, None);
        }
    };
    child.summary = Some(outcome.summary);
    child.completed = outcome.output.is_complete();
    if let Some(e) = &outcome.output.failure {
        child.failure = Some(e.to_string());
        return (child, None);
    }
    if let Ok(sc) = cfg.scenario() {
        if let Some(Source::Manufactured(ms)) = &sc.source {
            let n = outcome.output.p.len() - 1;
            let t = outcome.output.p.times()[n];
            child.max_error = Some(ms.max_error(outcome.output.p.slice(n), t));
        }
    }
    if cfg.law.exponents.len() < 2 {
        child.bounds_skipped = Some("single-term law".into());
        return (child, None);
    }
    match bounds_for_run(dir, None, window, plot_csv) {
        Ok(file) => {
            for e in &file.report.entries {
                child.fitted_c.insert(e.id.clone(), e.fitted_c);
            }
            (child, Some(file.report))
        }
        Err(e) => {
            child.failure = Some(format!("bounds: {e}"));
            (child, None)
        }
    }
}

fn fitted_rows(reports: &[Option<BoundReport>], t_ends: &[f64]) -> Vec<FittedCRow> {
    let mut ids: Vec<String> = Vec::new();
    for r in reports.iter().flatten() {
        for e in &r.entries {
            if !ids.contains(&e.id) {
                ids.push(e.id.clone());
            }
        }
    }
    let present: Vec<BoundReport> = reports.iter().flatten().cloned().collect();
    ids.iter()
        .map(|id| FittedCRow {
            id: id.clone(),
            values: reports
                .iter()
                .map(|r| r.as_ref().and_then(|r| r.entry(id)).map(|e| e.fitted_c))
                .collect(),
            spread: fitted_c_spread(&present, id),
            bounded: reports
                .iter()
                .zip(t_ends)
                .map(|(r, &t_end)| ratio_series_bounded(r.as_ref()?.entry(id)?, 1.0, t_end))
                .collect(),
        })
        .collect()
}

/// Re-evaluates the bounds of every completed child of an existing sweep
/// directory and rewrites its `fitted_c.csv`.
pub fn bounds_for_sweep(
    dir: &Path,
    exponents: Option<&ExponentsSection>,
    window: Option<f64>,
    plot_csv: bool,
) -> Result<Vec<FittedCRow>> {
    let path = dir.join("sweep.json");
    if !path.exists() {
        return Err(Error::MissingArtifact(format!(
            "{} not found",
            path.display()
        )));
    }
    let sweep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let children = sweep["children"]
        .as_array()
        .ok_or_else(|| Error::MissingArtifact("sweep.json lists no children".into()))?;
    let mut reports = Vec::with_capacity(children.len());
    let mut t_ends = Vec::with_capacity(children.len());
    let mut values = Vec::with_capacity(children.len());
    for c in children {
        let rel = c["dir"].as_str().unwrap_or_default();
        let child = dir.join(rel);
        values.push(c["value"].as_f64().unwrap_or(f64::NAN));
        let manifest = RunManifest::read(&child)?;
        let text = std::fs::read_to_string(child.join(&manifest.config_file))?;
        let cfg = ScenarioConfig::parse(&text)?;
        t_ends.push(cfg.time.t_end);
        if !manifest.completed || cfg.law.exponents.len() < 2 {
            reports.push(None);
            continue;
        }
        reports.push(Some(
            bounds_for_run(&child, exponents, window, plot_csv)?.report,
        ));
    }
    let rows = fitted_rows(&reports, &t_ends);
    std::fs::write(dir.join("fitted_c.csv"), fitted_c_csv(&values, &rows))?;
    Ok(rows)
}

/// One simulate + bounds run per value, `jobs` at a time, then a fitted-C
/// table across the children and, for manufactured grid sweeps, a
/// convergence table. Writes `sweep.json` and `fitted_c.csv` into `out`.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep(
    template: &ScenarioConfig,
    axis: Axis,
    values: &[f64],
    out: &Path,
    seed: u64,
    jobs: usize,
    window: Option<f64>,
    plot_csv: bool,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::validation("values", "need at least one sweep value"));
    }
    let configs = values
        .iter()
        .map(|&v| {
            let mut c = template.clone();
            axis.apply(&mut c, v)?;
            c.scenario()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<(SweepChild, Option<BoundReport>)> = pool.install(|| {
        configs
            .par_iter()
            .zip(values)
            .enumerate()
            .map(|(i, (c, &v))| {
                let rel = child_dir_name(axis, i);
                run_child(c, v, &out.join(&rel), rel, seed, window, plot_csv)
            })
            .collect()
    });
    let (children, reports): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let t_ends: Vec<f64> = configs.iter().map(|c| c.time.t_end).collect();
    let fitted_c = fitted_rows(&reports, &t_ends);

    let mut convergence = Vec::new();
    if axis == Axis::Grid {
        let mut prev: Option<f64> = None;
        for (c, ch) in configs.iter().zip(&children) {
            if let Some(err) = ch.max_error {
                convergence.push(ConvergenceRow {
                    n: c.grid.nx,
                    error: err,
                    ratio: prev.map(|p| p / err),
                });
                prev = Some(err);
            }
        }
    }
    let failures = children
        .iter()
        .filter_map(|c| c.failure.as_ref().map(|f| format!("{}: {f}", c.dir)))
        .collect();
    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        scenario_id: template.id.clone(),
        axis,
        values: values.to_vec(),
        seed,
        children,
        fitted_c,
        convergence,
        failures,
        reports,
    };
    std::fs::write(
        out.join("sweep.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    std::fs::write(out.join("fitted_c.csv"), report.fitted_c_csv())?;
    if !report.convergence.is_empty() {
        let mut s = String::from("n,error,ratio\n");
        for r in &report.convergence {
            s.push_str(&format!(
                "{},{:e},{}\n",
                r.n,
                r.error,
                r.ratio.map_or(String::new(), |x| format!("{x}"))
            ));
        }
        std::fs::write(out.join("convergence.csv"), s)?;
    }
    Ok(report)
}
