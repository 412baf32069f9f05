//! Seeded verification corpora for the constitutive law, the weighted
//! inequalities and the recurrence lemma.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::SCHEMA_VERSION;
use crate::constitutive::{
    build_weights, check_sdc, verify_constitutive_field, xi_samples_with_zero, ConstitutiveReport,
    ForchheimerLaw,
};
use crate::error::{Error, Result};
use crate::grid::{Field, SpaceTimeField};
use crate::inequalities::{
    default_sobolev_exponents, estimate_c0_formula, estimate_c_empirical, run_recurrence,
    sobolev_quotient, test_corpus, threshold, vanishing_trace_gradient, verify_corollary_k,
    verify_parabolic_interpolation, CorollaryMargin, EmpiricalConstant, InterpolationMargin,
    PSConfig, RecurrenceSpec, TestFunction, DEFAULT_CONJUGATE_CAP,
};
use crate::weighted_norms::{check_elementary_inequalities, ElementaryReport};

use super::config::ScenarioConfig;

pub const SLACK_TOL: f64 = 1e-9;
pub const ROOT_TOL: f64 = 1e-10;
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const RECURRENCE_LEVEL: f64 = 1e-6;
pub const WORKED_CASE_TOL: f64 = 1e-12;

/// Heterogeneous two-term scenario used when no config is given.
pub const REFERENCE_SCENARIO: &str = include_str!("../../scenarios/heterogeneous.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Constitutive,
    Inequalities,
    Recurrence,
}

impl Target {
    pub const ALL: [Target; 3] = [
        Target::Constitutive,
        Target::Inequalities,
        Target::Recurrence,
    ];

    /// Parses target names; `all` expands to every target. Duplicates collapse.
    pub fn parse_list(names: &[String]) -> Result<Vec<Target>> {
        if names.is_empty() {
            return Err(Error::validation("targets", "no verification target given"));
        }
        let mut out = Vec::new();
        for n in names {
            match n.as_str() {
                "all" => out.extend(Self::ALL),
                "constitutive" => out.push(Target::Constitutive),
                "inequalities" => out.push(Target::Inequalities),
                "recurrence" => out.push(Target::Recurrence),
                other => {
                    return Err(Error::validation(
                        "targets",
                        format!("unknown target `{other}`"),
                    ))
                }
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstitutiveTarget {
    pub grid: usize,
    pub xi_samples: usize,
    pub report: ConstitutiveReport,
    pub min_slack: f64,
    /// Worst relative gap to the quadratic-formula root; only for laws `a0 + a1 s`.
    pub closed_form_max_rel_error: Option<f64>,
    pub dimension_condition: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusMargins {
    pub index: usize,
    pub interpolation: InterpolationMargin,
    pub corollary: CorollaryMargin,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalitiesTarget {
    pub grid: usize,
    pub time_samples: usize,
    pub r: f64,
    pub q: f64,
    pub q0: f64,
    pub q0_star: f64,
    pub conjugate_cap: f64,
    pub empirical: EmpiricalConstant,
    pub safety_factor: f64,
    pub sobolev_c: f64,
    pub c0: f64,
    /// `||f||_{q0*} / ||grad f||_{q0}` for `sin(pi x) sin(pi y)` on this grid.
    pub sine_quotient: f64,
    pub corpus: Vec<CorpusMargins>,
    pub min_interpolation_margin: f64,
    pub min_corollary_margin: f64,
    pub elementary: ElementaryReport,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceTarget {
    pub specs: usize,
    pub steps: usize,
    /// Specs whose sequence dropped below the level within the step budget.
    pub converged: usize,
    /// Largest number of steps any spec needed to drop below the level.
    pub max_steps_needed: usize,
    /// Converged specs whose sequence later overflowed. At the threshold a
    /// single-term recurrence is the equality case `Y_i = Y0 B^{-i/mu}`,
    /// whose rounding errors grow by `1 + mu` per step.
    pub later_overflowed: usize,
    pub worked_case_max_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub scenario_id: String,
    pub targets: Vec<Target>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constitutive: Option<ConstitutiveTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inequalities: Option<InequalitiesTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recurrence: Option<RecurrenceTarget>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

pub fn reference_config() -> ScenarioConfig {
    ScenarioConfig::parse(REFERENCE_SCENARIO).expect("reference scenario parses")
}

fn law_on_grid(cfg: &ScenarioConfig, n: usize) -> Result<(ForchheimerLaw, Field)> {
    let mut c = cfg.clone();
    c.grid.nx = n;
    c.grid.ny = n;
    let sc = c.scenario()?;
    Ok((sc.law, sc.porosity))
}

/// Largest relative gap between the law's root and `2 xi / (a0 + sqrt(a0^2 + 4 a1 xi))`.
pub fn closed_form_root_error(law: &ForchheimerLaw, xi: &[f64]) -> Result<Option<f64>> {
    if law.exponents() != [0.0, 1.0] {
        return Ok(None);
    }
    let mut worst = 0.0f64;
    for k in 0..law.grid().len() {
        let (a0, a1) = (
            law.coefficients()[0].values()[k],
            law.coefficients()[1].values()[k],
        );
        for &x in xi.iter().filter(|x| **x > 0.0) {
            let exact = 2.0 * x / (a0 + (a0 * a0 + 4.0 * a1 * x).sqrt());
            let s = law.solve_s(k, x)?;
            worst = worst.max((s - exact).abs() / exact);
        }
    }
    Ok(Some(worst))
}

pub fn verify_constitutive(cfg: &ScenarioConfig) -> Result<ConstitutiveTarget> {
    let v = &cfg.verify;
    let (law, _) = law_on_grid(cfg, v.constitutive_grid)?;
    let xi = xi_samples_with_zero(v.xi_count, v.xi_min, v.xi_max);
    let report = verify_constitutive_field(&law, &xi)?;
    let closed = closed_form_root_error(&law, &xi)?;
    let passed = report.passes(SLACK_TOL, RESIDUAL_TOL) && closed.is_none_or(|e| e <= ROOT_TOL);
    Ok(ConstitutiveTarget {
        grid: v.constitutive_grid,
        xi_samples: xi.len(),
        min_slack: report.min_slack(),
        report,
        closed_form_max_rel_error: closed,
        dimension_condition: check_sdc(law.degree(), 2)?,
        passed,
    })
}

/// `u_k(t) = cos(pi t / 2) f_k + sin(pi t / 2) f_{k+1}` on `t in [0, 1]`.
fn space_time_corpus(
    corpus: &[TestFunction],
    grid: &crate::grid::Grid2D,
    samples: usize,
) -> Result<Vec<SpaceTimeField>> {
    let fields: Vec<Field> = corpus.iter().map(|f| f.sample(grid)).collect();
    let times: Vec<f64> = (0..samples)
        .map(|j| j as f64 / (samples - 1) as f64)
        .collect();
    (0..fields.len())
        .map(|k| {
            let (f, g) = (&fields[k], &fields[(k + 1) % fields.len()]);
            let slices = times
                .iter()
                .map(|&t| {
                    let (c, s) = ((0.5 * PI * t).cos(), (0.5 * PI * t).sin());
                    f.zip_map(g, |a, b| c * a + s * b)
                })
                .collect::<Result<Vec<_>>>()?;
            SpaceTimeField::new(*grid, times.clone(), slices)
        })
        .collect()
}

pub fn verify_inequalities(cfg: &ScenarioConfig, seed: u64) -> Result<InequalitiesTarget> {
    let v = &cfg.verify;
    if v.time_samples < 2 || v.corpus_size == 0 {
        return Err(Error::validation(
            "verify.time_samples",
            "need at least two time samples and one corpus function",
        ));
    }
    let (law, phi) = law_on_grid(cfg, v.corpus_grid)?;
    let grid = *law.grid();
    let weights = build_weights(&law)?;
    let a = weights.a;
    let q = 2.0 - a;
    let (r_default, q0_default) = default_sobolev_exponents(a, 2)?;
    let r = cfg.exponents.r.unwrap_or(r_default);
    let q0 = cfg.exponents.q0.unwrap_or(q0_default);
    let empirical = estimate_c_empirical(&grid, q0, 2, v.sobolev_trials, seed)?;
    let sobolev_c = cfg
        .exponents
        .sobolev_c
        .unwrap_or(empirical.lower_estimate * v.safety_factor);
    let ps = PSConfig::new(r, q, q0, 2, phi.clone(), weights.w1.clone(), sobolev_c)?;
    let c0 = estimate_c0_formula(&ps)?;

    let corpus = test_corpus(&grid, v.corpus_size, seed.wrapping_add(1));
    let mut margins = Vec::with_capacity(corpus.len());
    for (index, u) in space_time_corpus(&corpus, &grid, v.time_samples)?
        .iter()
        .enumerate()
    {
        let interpolation = verify_parabolic_interpolation(u, &phi, &weights.w1, r, q, c0)?;
        let grads = u.slices().iter().map(vanishing_trace_gradient).collect();
        let f = SpaceTimeField::new(grid, u.times().to_vec(), grads)?;
        let corollary = verify_corollary_k(u, &f, &law, &weights, &phi, c0, r)?;
        margins.push(CorpusMargins {
            index,
            interpolation,
            corollary,
        });
    }
    let min_interpolation_margin = margins
        .iter()
        .map(|m| {
            m.interpolation
                .margin_product
                .min(m.interpolation.margin_sum)
        })
        .fold(f64::INFINITY, f64::min);
    let min_corollary_margin = margins
        .iter()
        .map(|m| m.corollary.margin)
        .fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let elementary = check_elementary_inequalities(&mut rng, v.elementary_samples);
    let sine = Field::from_fn(grid, |x, y| (PI * x).sin() * (PI * y).sin())?;
    let passed = min_interpolation_margin >= -SLACK_TOL
        && min_corollary_margin >= -SLACK_TOL
        && elementary.min_slack() >= -SLACK_TOL;
    Ok(InequalitiesTarget {
        grid: v.corpus_grid,
        time_samples: v.time_samples,
        r,
        q,
        q0,
        q0_star: ps.q0_star(),
        conjugate_cap: DEFAULT_CONJUGATE_CAP,
        empirical,
        safety_factor: v.safety_factor,
        sobolev_c,
        c0,
        sine_quotient: sobolev_quotient(&sine, q0, 2)?,
        corpus: margins,
        min_interpolation_margin,
        min_corollary_margin,
        elementary,
        passed,
    })
}

pub fn verify_recurrence(cfg: &ScenarioConfig, seed: u64) -> Result<RecurrenceTarget> {
    let v = &cfg.verify;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let mut converged = 0;
    let mut max_steps_needed = 0;
    let mut later_overflowed = 0;
    for _ in 0..v.recurrence_specs {
        let mut spec = RecurrenceSpec::random(&mut rng);
        spec.y0 = threshold(&spec);
        let traj = run_recurrence(&spec, v.recurrence_steps)?;
        if let Some(i) = traj.values.iter().position(|y| *y < RECURRENCE_LEVEL) {
            converged += 1;
            max_steps_needed = max_steps_needed.max(i);
            later_overflowed += usize::from(traj.diverged);
        }
    }
    let worked = RecurrenceSpec::new(vec![1.0], vec![1.0], 2.0, 0.5)?;
    let traj = run_recurrence(&worked, 20)?;
    let worked_case_max_error = traj
        .values
        .iter()
        .enumerate()
        .map(|(i, y)| (y - 0.5f64.powi(i as i32 + 1)).abs())
        .fold(0.0, f64::max);
    Ok(RecurrenceTarget {
        specs: v.recurrence_specs,
        steps: v.recurrence_steps,
        converged,
        max_steps_needed,
        later_overflowed,
        worked_case_max_error,
        passed: converged == v.recurrence_specs && worked_case_max_error <= WORKED_CASE_TOL,
    })
}

/// Runs the requested targets. The seed overrides `[verify].seed`.
pub fn run_verification(
    cfg: &ScenarioConfig,
    targets: &[Target],
    seed: Option<u64>,
) -> Result<VerifyReport> {
    let seed = seed.unwrap_or(cfg.verify.seed);
    let mut rep = VerifyReport {
        schema_version: SCHEMA_VERSION,
        seed,
        scenario_id: cfg.id.clone(),
        targets: targets.to_vec(),
        constitutive: None,
        inequalities: None,
        recurrence: None,
        passed: true,
    };
    for t in targets {
        match t {
            Target::Constitutive => {
                let r = verify_constitutive(cfg)?;
                rep.passed &= r.passed;
                rep.constitutive = Some(r);
            }
            Target::Inequalities => {
                let r = verify_inequalities(cfg, seed)?;
                rep.passed &= r.passed;
                rep.inequalities = Some(r);
            }
            Target::Recurrence => {
                let r = verify_recurrence(cfg, seed)?;
                rep.passed &= r.passed;
                rep.recurrence = Some(r);
            }
        }
    }
    Ok(rep)
}
