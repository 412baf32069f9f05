//! Scenario files.
//!
//! ```toml
//! id = "heterogeneous"
//!
//! [grid]
//! nx = 32
//! ny = 32
//! # lx = 1.0, ly = 1.0, x0 = 0.0, y0 = 0.0
//!
//! [law]
//! exponents = [0.0, 1.0]
//! coefficients = ["1 + 0.5*sin(2*pi*x)", "0.5 + x*y"]   # number | expression | { raster = "file.frst" }
//! contrast = 1.0
//!
//! [porosity]
//! field = "0.2 + 0.1*(x + y)"
//!
//! [boundary]
//! psi = "0.1*sin(t)"
//! amplitude = 1.0
//! # initial = "..."        defaults to psi at t = 0
//! # manufactured = true    treat psi as the exact solution and add the matching forcing
//!
//! [time]
//! t_end = 10.0
//! dt = 0.01
//! snapshot_every = 5
//!
//! [exponents]
//! # r, r1, r2, q0, c2, sobolev_c, window
//!
//! [verify]
//! # seed, xi_count, corpus_size, time_samples, ...
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{ExponentPack, DEFAULT_WINDOW};
use crate::constitutive::{build_weights, check_sdc, ForchheimerLaw};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::grid::{Field, Grid2D};
use crate::inequalities::{
    default_sobolev_exponents, estimate_c0_formula, estimate_c_empirical, PSConfig,
};
use crate::solver::{BoundaryData, ManufacturedSolution, PicardOptions, Scenario};

use super::raster::read_raster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    Expr(String),
    Raster { raster: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub y0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    pub exponents: Vec<f64>,
    pub coefficients: Vec<FieldSpec>,
    /// Log-contrast of the coefficient fields: 1 keeps them, 0 flattens each
    /// to its geometric mean.
    #[serde(default = "one")]
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PorositySection {
    pub field: FieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    #[serde(default = "zero_expr")]
    pub psi: String,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<FieldSpec>,
    #[serde(default)]
    pub manufactured: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one_usize")]
    pub snapshot_every: usize,
    #[serde(default = "picard_max_iter")]
    pub picard_max_iter: usize,
    #[serde(default = "picard_tol")]
    pub picard_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<f64>,
    /// Constant of the weighted Sobolev inequality used by the cylinder bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    /// Unweighted Sobolev constant; defaults to the empirical estimate times `safety_factor`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev_c: Option<f64>,
    #[serde(default = "safety_factor")]
    pub safety_factor: f64,
    #[serde(default = "sobolev_trials")]
    pub sobolev_trials: usize,
    #[serde(default = "default_window")]
    pub window: f64,
}

impl Default for ExponentsSection {
    fn default() -> Self {
        Self {
            r: None,
            r1: None,
            r2: None,
            q0: None,
            c2: None,
            sobolev_c: None,
            safety_factor: safety_factor(),
            sobolev_trials: sobolev_trials(),
            window: default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "xi_count")]
    pub xi_count: usize,
    #[serde(default = "xi_min")]
    pub xi_min: f64,
    #[serde(default = "xi_max")]
    pub xi_max: f64,
    #[serde(default = "constitutive_grid")]
    pub constitutive_grid: usize,
    #[serde(default = "corpus_size")]
    pub corpus_size: usize,
    #[serde(default = "corpus_grid")]
    pub corpus_grid: usize,
    #[serde(default = "time_samples")]
    pub time_samples: usize,
    #[serde(default = "sobolev_trials")]
    pub sobolev_trials: usize,
    #[serde(default = "safety_factor")]
    pub safety_factor: f64,
    #[serde(default = "elementary_samples")]
    pub elementary_samples: usize,
    #[serde(default = "recurrence_specs")]
    pub recurrence_specs: usize,
    #[serde(default = "recurrence_steps")]
    pub recurrence_steps: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub grid: GridSection,
    pub law: LawSection,
    pub porosity: PorositySection,
    #[serde(default = "default_boundary")]
    pub boundary: BoundarySection,
    pub time: TimeSection,
    #[serde(default)]
    pub exponents: ExponentsSection,
    #[serde(default)]
    pub verify: VerifySection,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn zero_expr() -> String {
    "0".into()
}
fn picard_max_iter() -> usize {
    PicardOptions::default().max_iter
}
fn picard_tol() -> f64 {
    PicardOptions::default().tol
}
fn safety_factor() -> f64 {
    2.0
}
fn sobolev_trials() -> usize {
    64
}
fn default_window() -> f64 {
    DEFAULT_WINDOW
}
fn xi_count() -> usize {
    64
}
fn xi_min() -> f64 {
    1e-6
}
fn xi_max() -> f64 {
    1e6
}
fn constitutive_grid() -> usize {
    32
}
fn corpus_size() -> usize {
    20
}
fn corpus_grid() -> usize {
    64
}
fn time_samples() -> usize {
    32
}
fn elementary_samples() -> usize {
    2000
}
fn recurrence_specs() -> usize {
    200
}
fn recurrence_steps() -> usize {
    200
}
fn default_id() -> String {
    "scenario".into()
}
fn default_boundary() -> BoundarySection {
    BoundarySection {
        psi: zero_expr(),
        amplitude: 1.0,
        initial: None,
        manufactured: false,
    }
}

fn parse_expr(field: &str, src: &str) -> Result<Expr> {
    Expr::parse(src).map_err(|e| Error::validation(field, e.to_string()))
}

/// Maps each positive field to `m (a / m)^c`, `m` its geometric mean.
/// Fields with zeros are left alone.
pub fn apply_contrast(field: &Field, contrast: f64) -> Result<Field> {
    if contrast == 1.0 || field.min() <= 0.0 {
        return Ok(field.clone());
    }
    let logs: Vec<f64> = field.values().iter().map(|v| v.ln()).collect();
    let mean = crate::grid::pairwise_sum(&logs) / logs.len() as f64;
    field.map(|v| (mean + contrast * (v.ln() - mean)).exp())
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a scenario file, making raster paths absolute (they are
    /// written relative to the file).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        cfg.resolve_paths(&dir.canonicalize()?);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |spec: &mut FieldSpec| {
            if let FieldSpec::Raster { raster } = spec {
                if raster.is_relative() {
                    *raster = base.join(&*raster);
                }
            }
        };
        self.law.coefficients.iter_mut().for_each(fix);
        fix(&mut self.porosity.field);
        if let Some(init) = self.boundary.initial.as_mut() {
            fix(init);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid2D> {
        let g = &self.grid;
        if g.nx < 2 || g.ny < 2 {
            return Err(Error::validation(
                "grid.nx",
                "need at least 2 cells per side",
            ));
        }
        if !(g.lx > 0.0 && g.ly > 0.0) {
            return Err(Error::validation(
                "grid.lx",
                "side lengths must be positive",
            ));
        }
        Grid2D::new(
            g.nx,
            g.ny,
            g.lx / g.nx as f64,
            g.ly / g.ny as f64,
            g.x0,
            g.y0,
        )
    }

    fn field(&self, grid: Grid2D, spec: &FieldSpec, name: &str) -> Result<Field> {
        match spec {
            FieldSpec::Constant(v) => {
                Field::constant(grid, *v).map_err(|e| Error::validation(name, e.to_string()))
            }
            FieldSpec::Expr(src) => {
                let e = parse_expr(name, src)?;
                if e.depends_on(Var::T) {
                    return Err(Error::validation(name, "must not depend on t"));
                }
                Field::from_fn(grid, |x, y| e.eval(x, y, 0.0))
                    .map_err(|e| Error::validation(name, e.to_string()))
            }
            FieldSpec::Raster { raster } => {
                let f = read_raster(raster)
                    .map_err(|e| Error::validation(name, format!("{}: {e}", raster.display())))?;
                if f.grid().nx != grid.nx || f.grid().ny != grid.ny {
                    return Err(Error::validation(
                        name,
                        format!(
                            "raster is {}x{}, grid is {}x{}",
                            f.grid().nx,
                            f.grid().ny,
                            grid.nx,
                            grid.ny
                        ),
                    ));
                }
                Field::new(grid, f.into_values())
            }
        }
    }

    fn coefficient_expr(&self, i: usize) -> Result<Expr> {
        let name = format!("law.coefficients[{i}]");
        match &self.law.coefficients[i] {
            FieldSpec::Constant(v) => Ok(Expr::constant(*v)),
            FieldSpec::Expr(src) => parse_expr(&name, src),
            FieldSpec::Raster { .. } => Err(Error::validation(
                name,
                "manufactured mode needs analytic coefficients",
            )),
        }
    }

    fn psi(&self) -> Result<Expr> {
        let a = self.boundary.amplitude;
        if !a.is_finite() {
            return Err(Error::validation("boundary.amplitude", "must be finite"));
        }
        Ok(parse_expr("boundary.psi", &self.boundary.psi)?.scaled(a))
    }

    fn picard(&self) -> PicardOptions {
        PicardOptions {
            max_iter: self.time.picard_max_iter,
            tol: self.time.picard_tol,
        }
    }

    pub fn law(&self) -> Result<ForchheimerLaw> {
        let grid = self.grid()?;
        if !(self.law.contrast >= 0.0 && self.law.contrast.is_finite()) {
            return Err(Error::validation("law.contrast", "must be finite and >= 0"));
        }
        let fields = self
            .law
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let f = self.field(grid, s, &format!("law.coefficients[{i}]"))?;
                apply_contrast(&f, self.law.contrast)
            })
            .collect::<Result<Vec<_>>>()?;
        if self.law.exponents.len() == 1 && fields.len() == 1 {
            if self.law.exponents[0] != 0.0 {
                return Err(Error::validation(
                    "law.exponents",
                    "first exponent must be exactly 0",
                ));
            }
            return ForchheimerLaw::darcy(fields.into_iter().next().expect("one field"));
        }
        ForchheimerLaw::new(self.law.exponents.clone(), fields)
    }

    /// Builds and validates the scenario.
    pub fn scenario(&self) -> Result<Scenario> {
        let grid = self.grid()?;
        let law = self.law()?;
        let porosity = self.field(grid, &self.porosity.field, "porosity.field")?;
        if porosity.min() <= 0.0 {
            return Err(Error::validation(
                "porosity.field",
                format!("must be > 0 (min {})", porosity.min()),
            ));
        }
        let psi = self.psi()?;
        let sc = if self.boundary.manufactured {
            if self.law.contrast != 1.0 {
                return Err(Error::validation(
                    "law.contrast",
                    "manufactured mode needs contrast = 1",
                ));
            }
            let coeffs = (0..self.law.coefficients.len())
                .map(|i| self.coefficient_expr(i))
                .collect::<Result<Vec<_>>>()?;
            let phi = match &self.porosity.field {
                FieldSpec::Constant(v) => Expr::constant(*v),
                FieldSpec::Expr(src) => parse_expr("porosity.field", src)?,
                FieldSpec::Raster { .. } => {
                    return Err(Error::validation(
                        "porosity.field",
                        "manufactured mode needs an analytic porosity",
                    ))
                }
            };
            let ms = ManufacturedSolution::new(psi, &self.law.exponents, coeffs, phi)?;
            let mut sc = ms.scenario(grid, self.time.t_end, self.time.dt, self.picard())?;
            sc.law = law;
            sc.snapshot_every = self.time.snapshot_every;
            sc
        } else {
            let boundary = BoundaryData::new(psi);
            let initial = match &self.boundary.initial {
                Some(spec) => self.field(grid, spec, "boundary.initial")?,
                None => Field::from_fn(grid, |x, y| boundary.value(x, y, 0.0))
                    .map_err(|e| Error::validation("boundary.psi", e.to_string()))?,
            };
            Scenario {
                law,
                porosity,
                boundary,
                initial,
                t_end: self.time.t_end,
                dt: self.time.dt,
                snapshot_every: self.time.snapshot_every,
                picard: self.picard(),
                source: None,
            }
        };
        sc.validate()?;
        Ok(sc)
    }

    /// Non-fatal findings about the law, e.g. a degree outside the range
    /// where the Sobolev embedding used by the bounds is available.
    pub fn advisories(&self, law: &ForchheimerLaw) -> Vec<String> {
        let mut out = Vec::new();
        if law.is_darcy() {
            out.push("single-term law: solver validation mode, bounds are not evaluated".into());
            return out;
        }
        match check_sdc(law.degree(), 2) {
            Ok(true) => {}
            Ok(false) => out.push(format!(
                "degree {} fails the dimension condition for n = 2",
                law.degree()
            )),
            Err(e) => out.push(format!("dimension condition not checked: {e}")),
        }
        out.push("rectangular domain: corners are outside the smooth-boundary setting".into());
        out
    }

    /// Exponent pack and `c2` for the bounds on this scenario's law and porosity.
    pub fn bound_parameters(&self, sc: &Scenario, seed: u64) -> Result<BoundParameters> {
        let law = &sc.law;
        let weights = build_weights(law)?;
        let a = weights.a;
        let (r_default, q0_default) = default_sobolev_exponents(a, 2)?;
        let ex = &self.exponents;
        let r = ex.r.unwrap_or(r_default);
        let pack = match (ex.r1, ex.r2) {
            (None, None) => ExponentPack::with_defaults(a, r)?,
            (r1, r2) => {
                let r0 = ExponentPack::r0_for(a, r);
                ExponentPack::new(
                    a,
                    r,
                    r1.unwrap_or_else(|| ExponentPack::default_r1(r0)),
                    r2.unwrap_or_else(|| ExponentPack::default_r2(r)),
                )?
            }
        };
        if !(ex.window > 0.0) {
            return Err(Error::validation("exponents.window", "must be positive"));
        }
        if let Some(c2) = ex.c2 {
            if !(c2 > 0.0 && c2.is_finite()) {
                return Err(Error::validation("exponents.c2", "must be positive"));
            }
            return Ok(BoundParameters {
                pack,
                c2,
                q0: None,
                sobolev_c: None,
                window: ex.window,
            });
        }
        let q0 = ex.q0.unwrap_or(q0_default);
        let grid = *sc.grid();
        let c = match ex.sobolev_c {
            Some(c) => c,
            None => {
                estimate_c_empirical(&grid, q0, 2, ex.sobolev_trials, seed)?.lower_estimate
                    * ex.safety_factor
            }
        };
        let ps = PSConfig::new(
            r,
            2.0 - a,
            q0,
            2,
            sc.porosity.clone(),
            weights.w1.clone(),
            c,
        )?;
        Ok(BoundParameters {
            pack,
            c2: estimate_c0_formula(&ps)?,
            q0: Some(q0),
            sobolev_c: Some(c),
            window: ex.window,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParameters {
    pub pack: ExponentPack,
    pub c2: f64,
    pub q0: Option<f64>,
    pub sobolev_c: Option<f64>,
    pub window: f64,
}
