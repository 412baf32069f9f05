//! `forch`: simulate scenarios, verify the inequality corpora, evaluate the
//! a-priori bounds on runs and sweep scenario knobs.
//!
//! Exit codes: 0 success, 1 an invariant or sweep child failed, 2 bad input
//! (config, usage, missing artifacts), 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forchheimer::harness::sweep::{bounds_for_sweep, FittedCRow};
use forchheimer::harness::verify::reference_config;
use forchheimer::harness::{
    bounds_for_run, run_sweep, run_verification, simulate, Axis, ScenarioConfig, Target,
};
use forchheimer::Error;

#[derive(Parser)]
#[command(
    name = "forch",
    version,
    about = "Generalized Forchheimer flow simulator"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BoundsFlags {
    /// Trailing window for the large-time surrogates.
    #[arg(long)]
    window: Option<f64>,
    /// Also write plotting CSVs.
    #[arg(long)]
    plot_csv: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write a run directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        plot_csv: bool,
    },
    /// Run verification corpora: constitutive, inequalities, recurrence or all.
    Verify {
        targets: Vec<String>,
        /// Scenario whose law and [verify] section are used (default: built-in heterogeneous law).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every bound on a run directory, or on each child of a sweep directory.
    Bounds {
        dir: PathBuf,
        /// Take the [exponents] section from this file instead of the run's config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: BoundsFlags,
    },
    /// One run per value of a scenario knob, with a fitted-constant table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// amplitude, grid, dt or contrast.
        #[arg(long)]
        axis: String,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        flags: BoundsFlags,
    },
    /// Summarize a run or sweep directory.
    Report {
        dir: PathBuf,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Invariant(String),
    Input(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingArtifact(_) | Error::Io(_) | Error::Json(_) => {
                Failure::Input(e.to_string())
            }
            e if e.is_validation() => Failure::Input(e.to_string()),
            e => Failure::Numeric(e.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Failure::Input(format!("{}: {io}", path.display())),
        e => e.into(),
    })
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fitted_table(rows: &[FittedCRow]) -> String {
    let mut s = format!("{:<18} {:>12}  fitted C per child\n", "bound", "spread");
    for r in rows {
        let spread = r.spread.map_or("-".into(), |v| format!("{v:.3}"));
        let vals: Vec<String> = r
            .values
            .iter()
            .map(|v| v.map_or("-".into(), |x| format!("{x:.3e}")))
            .collect();
        s.push_str(&format!(
            "{:<18} {:>12}  {}\n",
            r.id,
            spread,
            vals.join(" ")
        ));
    }
    s
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            plot_csv,
        } => {
            let cfg = load_config(&config)?;
            let o = simulate(&cfg, &out, seed, plot_csv)?;
            for a in &o.manifest.advisories {
                eprintln!("advisory: {a}");
            }
            if let Some(e) = &o.output.failure {
                return Err(Failure::Numeric(format!(
                    "{e} (diagnostics in {})",
                    out.join("failure.json").display()
                )));
            }
            println!(
                "{} steps, {} snapshots -> {}",
                o.summary.steps,
                o.manifest.snapshots.len(),
                out.display()
            );
            Ok(())
        }
        Command::Verify {
            targets,
            config,
            seed,
            out,
        } => {
            let targets = Target::parse_list(&targets)?;
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => reference_config(),
            };
            let rep = run_verification(&cfg, &targets, seed)?;
            emit(&rep.to_json()?, out.as_deref())?;
            if rep.passed {
                Ok(())
            } else {
                Err(Failure::Invariant("verification failed".into()))
            }
        }
        Command::Bounds { dir, config, flags } => {
            let exponents = config
                .map(|p| load_config(&p))
                .transpose()?
                .map(|c| c.exponents);
            if dir.join("sweep.json").exists() {
                let rows =
                    bounds_for_sweep(&dir, exponents.as_ref(), flags.window, flags.plot_csv)?;
                print!("{}", fitted_table(&rows));
            } else {
                let file = bounds_for_run(&dir, exponents.as_ref(), flags.window, flags.plot_csv)?;
                for e in &file.report.entries {
                    println!("{:<18} fitted C {:.4e}", e.id, e.fitted_c);
                }
            }
            Ok(())
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
            seed,
            flags,
        } => {
            let axis: Axis = axis.parse()?;
            let cfg = load_config(&config)?;
            let jobs = cli
                .jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rep = run_sweep(
                &cfg,
                axis,
                &values,
                &out,
                seed,
                jobs,
                flags.window,
                flags.plot_csv,
            )?;
            print!("{}", fitted_table(&rep.fitted_c));
            for r in &rep.convergence {
                let ratio = r.ratio.map_or("-".into(), |v| format!("{v:.3}"));
                println!("n = {:>4}  error {:.4e}  ratio {ratio}", r.n, r.error);
            }
            if rep.failures.is_empty() {
                Ok(())
            } else {
                Err(Failure::Invariant(format!(
                    "failed children:\n  {}",
                    rep.failures.join("\n  ")
                )))
            }
        }
        Command::Report { dir, out } => {
            let text = report(&dir)?;
            emit(&text, out.as_deref())
        }
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn report(dir: &Path) -> Result<String, Failure> {
    let mut s = String::new();
    if dir.join("sweep.json").exists() {
        let sweep = read_json(&dir.join("sweep.json"))?;
        s.push_str(&format!(
            "sweep of {} over {}: {} children, {} failures\n",
            sweep["scenario_id"].as_str().unwrap_or("?"),
            sweep["axis"].as_str().unwrap_or("?"),
            sweep["children"].as_array().map_or(0, |c| c.len()),
            sweep["failures"].as_array().map_or(0, |c| c.len()),
        ));
        for row in sweep["fitted_c"].as_array().into_iter().flatten() {
            let spread = row["spread"]
                .as_f64()
                .map_or("-".into(), |v| format!("{v:.3}"));
            s.push_str(&format!(
                "{:<18} spread {spread}\n",
                row["id"].as_str().unwrap_or("?")
            ));
        }
        for row in sweep["convergence"].as_array().into_iter().flatten() {
            s.push_str(&format!(
                "n = {} error {} ratio {}\n",
                row["n"], row["error"], row["ratio"]
            ));
        }
        return Ok(s);
    }
    let manifest = read_json(&dir.join("manifest.json"))?;
    s.push_str(&format!(
        "run {}: completed {}, {} snapshots\n",
        manifest["scenario_id"].as_str().unwrap_or("?"),
        manifest["completed"],
        manifest["snapshots"].as_array().map_or(0, |v| v.len()),
    ));
    let summary = read_json(&dir.join("summary.json"))?;
    for key in [
        "steps",
        "max_picard_iterations",
        "max_cg_iterations",
        "max_principle_holds",
        "worst_conservation_defect",
    ] {
        s.push_str(&format!("  {key}: {}\n", summary[key]));
    }
    if dir.join("bounds.json").exists() {
        let b = read_json(&dir.join("bounds.json"))?;
        for e in b["report"]["entries"].as_array().into_iter().flatten() {
            s.push_str(&format!(
                "{:<18} fitted C {}  finite {}\n",
                e["id"].as_str().unwrap_or("?"),
                e["fitted_c"],
                e["ratios_finite"]
            ));
        }
    }
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        // Ignored if a pool already exists; nothing has run yet.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
