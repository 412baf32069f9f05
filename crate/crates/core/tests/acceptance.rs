//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use forchheimer::harness::sweep::SweepReport;
use forchheimer::harness::verify::{
    reference_config, verify_constitutive, verify_inequalities, verify_recurrence,
};
use forchheimer::harness::{run_sweep, run_verification, Axis, ScenarioConfig, Target};
use forchheimer::solver::run;
use forchheimer::{ExponentPack, Field, ManufacturedSolution, PicardOptions};
use rand::SeedableRng;

const SLACK_TOL: f64 = 1e-9;
const ROOT_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-3;
const RATE_TOL: f64 = 1e-2;
const SPOT_TOL: f64 = 1e-12;
const SPREAD_LIMIT: f64 = 10.0;

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn scenario(name: &str) -> ScenarioConfig {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", name]
        .iter()
        .collect();
    ScenarioConfig::load(&p).expect("scenario loads")
}

fn constitutive() -> Outcome {
    let cfg = reference_config();
    let start = Instant::now();
    let r = verify_constitutive(&cfg).expect("constitutive check runs");
    let secs = start.elapsed().as_secs_f64();
    let root = r.closed_form_max_rel_error.unwrap_or(f64::INFINITY);
    Outcome {
        passed: r.min_slack >= -SLACK_TOL && root <= ROOT_TOL && secs < 5.0,
        detail: format!(
            "{}^2 grid, {} xi: min slack {:.3e}, closed-form root error {:.3e}, {:.2} s",
            r.grid, r.xi_samples, r.min_slack, root, secs
        ),
    }
}

fn recurrence() -> Outcome {
    let r = verify_recurrence(&reference_config(), 7).expect("recurrence check runs");
    Outcome {
        passed: r.passed,
        detail: format!(
            "{}/{} specs below 1e-6 within {} steps (worst {}), worked case error {:.1e}",
            r.converged, r.specs, r.steps, r.max_steps_needed, r.worked_case_max_error
        ),
    }
}

fn inequalities() -> Outcome {
    let cfg = reference_config();
    let start = Instant::now();
    let r = verify_inequalities(&cfg, 7).expect("inequality check runs");
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: r.corpus.len() == 20
            && r.min_interpolation_margin >= -SLACK_TOL
            && r.min_corollary_margin >= -SLACK_TOL
            && secs < 60.0,
        detail: format!(
            "{} functions on {}^2 x {} times: min margins {:.3e} / {:.3e}, {:.2} s",
            r.corpus.len(),
            r.grid,
            r.time_samples,
            r.min_interpolation_margin,
            r.min_corollary_margin,
            secs
        ),
    }
}

fn eigen_error_and_rate() -> (f64, f64) {
    let mut cfg = scenario("darcy_eigen.toml");
    cfg.time.snapshot_every = 1;
    let sc = cfg.scenario().unwrap();
    let out = run(&sc).unwrap().into_complete().unwrap();
    let last = out.p.len() - 1;
    let t = out.p.times()[last];
    assert!((t - 0.05).abs() < 1e-12);
    let lambda = 2.0 * PI * PI;
    let mode = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let exact = Field::from_fn(*sc.grid(), |x, y| (-lambda * t).exp() * mode(x, y)).unwrap();
    let exact_t = Field::from_fn(*sc.grid(), |x, y| {
        -lambda * (-lambda * t).exp() * mode(x, y)
    })
    .unwrap();
    let err = out
        .p
        .slice(last)
        .zip_map(&exact, |a, b| a - b)
        .unwrap()
        .max_abs();
    let rate = out
        .pbar_t
        .slice(last)
        .zip_map(&exact_t, |a, b| a - b)
        .unwrap()
        .max_abs()
        / exact_t.max_abs();
    (err, rate)
}

fn solver(sweep: &SweepReport) -> Outcome {
    let (eigen, _) = eigen_error_and_rate();
    let cfg = scenario("manufactured.toml");
    let sc = cfg.scenario().unwrap();
    let mms: &ManufacturedSolution = match &sc.source {
        Some(forchheimer::Source::Manufactured(m)) => m,
        _ => panic!("manufactured scenario has no exact solution"),
    };
    let picard = PicardOptions {
        max_iter: cfg.time.picard_max_iter,
        tol: cfg.time.picard_tol,
    };
    let errs: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let g = forchheimer::Grid2D::unit_square(n).unwrap();
            let s = mms
                .scenario(g, cfg.time.t_end, cfg.time.dt, picard)
                .unwrap();
            let out = run(&s).unwrap().into_complete().unwrap();
            let last = out.p.len() - 1;
            mms.max_error(out.p.slice(last), out.p.times()[last])
        })
        .collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let mut max_norm = Vec::new();
    for name in ["zero.toml", "darcy_eigen.toml"] {
        let out = run(&scenario(name).scenario().unwrap()).unwrap();
        max_norm.push(out.summary().max_principle_holds && out.is_complete());
    }
    for c in &sweep.children {
        max_norm.push(c.completed && c.summary.is_some_and(|s| s.max_principle_holds));
    }
    let passed = eigen <= EIGEN_TOL
        && ratios.iter().all(|r| (3.0..=5.0).contains(r))
        && max_norm.iter().all(|&b| b);
    Outcome {
        passed,
        detail: format!(
            "eigen error {eigen:.3e}, MMS ratios {:.3} {:.3}, max-norm control {}/{} runs",
            ratios[0],
            ratios[1],
            max_norm.iter().filter(|&&b| b).count(),
            max_norm.len()
        ),
    }
}

fn sweep_row(sweep: &SweepReport, id: &str) -> (bool, String) {
    let row = sweep.row(id).expect("bound present in the sweep");
    let spread = row.spread.unwrap_or(f64::INFINITY);
    let bounded = row.bounded.iter().all(|b| *b == Some(true));
    (
        spread < SPREAD_LIMIT && bounded,
        format!("{id} spread {spread:.3}, ratio series bounded {bounded}"),
    )
}

fn amplitude_pressure(sweep: &SweepReport) -> Outcome {
    let (passed, detail) = sweep_row(sweep, "sup_unit_window");
    Outcome { passed, detail }
}

fn amplitude_rate(sweep: &SweepReport) -> Outcome {
    let (row_ok, row) = sweep_row(sweep, "rate_late");
    let (_, rate) = eigen_error_and_rate();
    Outcome {
        passed: row_ok && rate <= RATE_TOL,
        detail: format!("{row}, Darcy pbar_t relative error {rate:.3e}"),
    }
}

fn exponents() -> Outcome {
    let p = ExponentPack::new(0.5, 4.0, 1.1, 4.0).unwrap();
    let spots = [
        (p.r0, 2.75),
        (p.kappa1, 11.0 / 3.0),
        (p.nu2, 20.0 / 9.0),
        (p.delta1, 1.0 / 3.0),
        (p.delta2, 1.0 / 12.0),
        (p.kappa4, 5.0 / 6.0),
    ];
    let worst = spots.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let bad = (0..10_000)
        .filter(|_| {
            let q = ExponentPack::random(&mut rng);
            !(q.kappa3 > 0.0
                && q.nu2 >= q.nu1
                && q.nu1 > 0.0
                && 1.0 + q.delta2 > q.delta1
                && q.delta1 > 0.0)
        })
        .count();
    Outcome {
        passed: worst <= SPOT_TOL && bad == 0,
        detail: format!("worst spot error {worst:.1e}, {bad} of 10000 random packs violate"),
    }
}

fn determinism() -> Outcome {
    let cfg = reference_config();
    let all = Target::parse_list(&["all".to_string()]).unwrap();
    let a = run_verification(&cfg, &all, Some(7))
        .unwrap()
        .to_json()
        .unwrap();
    let b = run_verification(&cfg, &all, Some(7))
        .unwrap()
        .to_json()
        .unwrap();
    Outcome {
        passed: a == b,
        detail: format!(
            "verify all --seed 7: {} bytes, identical {}",
            a.len(),
            a == b
        ),
    }
}

fn amplitude_sweep(dir: &Path) -> SweepReport {
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    run_sweep(
        &scenario("heterogeneous.toml"),
        Axis::Amplitude,
        &[0.25, 0.5, 1.0, 2.0, 4.0],
        dir,
        0,
        jobs,
        None,
        false,
    )
    .expect("amplitude sweep runs")
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; a filter naming nothing here skips the run.
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let tmp = tempfile::tempdir().unwrap();
    let sweep = amplitude_sweep(tmp.path());
    let criteria: [(&str, Check); 8] = [
        ("constitutive slack and root", Box::new(constitutive)),
        ("recurrence decay", Box::new(recurrence)),
        (
            "parabolic Poincare-Sobolev and corollary",
            Box::new(inequalities),
        ),
        (
            "solver accuracy and max-norm control",
            Box::new(|| solver(&sweep)),
        ),
        (
            "amplitude sweep, pressure bound",
            Box::new(|| amplitude_pressure(&sweep)),
        ),
        (
            "amplitude sweep, rate bound",
            Box::new(|| amplitude_rate(&sweep)),
        ),
        ("exponent values and orderings", Box::new(exponents)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!o.passed);
        println!("{tag} {} {name}: {}", i + 1, o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
