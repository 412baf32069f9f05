//! Backward-Euler finite-volume integrator for
//! `phi p_t = div(K(x, |grad p|) grad p) + f` on a rectangle with
//! time-dependent Dirichlet data, with Picard-lagged mobility.

pub mod cg;
mod manufactured;

pub use manufactured::ManufacturedSolution;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::ForchheimerLaw;
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::grid::{pairwise_sum, BoundaryValues, Field, Grid2D, SpaceTimeField};
use crate::weighted_norms::{gradient_field, gradient_magnitude};
use cg::{pcg, StencilMatrix};

const CG_RTOL: f64 = 1e-10;
const MAX_PRINCIPLE_SLACK: f64 = 1e-8;

/// Boundary extension `Psi(x, y, t)` and its derivatives, symbolic.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    psi: Expr,
    psi_x: Expr,
    psi_y: Expr,
    psi_t: Expr,
    psi_xt: Expr,
    psi_yt: Expr,
    psi_tt: Expr,
}

impl BoundaryData {
    pub fn new(psi: Expr) -> Self {
        let psi_x = psi.diff(Var::X);
        let psi_y = psi.diff(Var::Y);
        let psi_t = psi.diff(Var::T);
        Self {
            psi_xt: psi_x.diff(Var::T),
            psi_yt: psi_y.diff(Var::T),
            psi_tt: psi_t.diff(Var::T),
            psi_x,
            psi_y,
            psi_t,
            psi,
        }
    }

    pub fn zero() -> Self {
        Self::new(Expr::constant(0.0))
    }

    pub fn expr(&self) -> &Expr {
        &self.psi
    }

    pub fn is_zero(&self) -> bool {
        self.psi.as_constant() == Some(0.0)
    }

    /// `lambda * Psi`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self::new(self.psi.scaled(lambda))
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.psi.eval(x, y, t)
    }

    pub fn gradient(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [self.psi_x.eval(x, y, t), self.psi_y.eval(x, y, t)]
    }

    pub fn time_derivative(&self, x: f64, y: f64, t: f64) -> f64 {
        self.psi_t.eval(x, y, t)
    }

    pub fn gradient_time_derivative(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [self.psi_xt.eval(x, y, t), self.psi_yt.eval(x, y, t)]
    }

    pub fn second_time_derivative(&self, x: f64, y: f64, t: f64) -> f64 {
        self.psi_tt.eval(x, y, t)
    }

    fn sample(grid: &Grid2D, e: impl Fn(f64, f64) -> f64 + Sync) -> Result<Field> {
        let vals: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (x, y) = grid.cell_center(k);
                e(x, y)
            })
            .collect();
        Field::new(*grid, vals)
            .map_err(|_| Error::Domain("boundary extension is not finite on the grid".into()))
    }

    pub fn field(&self, grid: &Grid2D, t: f64) -> Result<Field> {
        Self::sample(grid, |x, y| self.value(x, y, t))
    }

    pub fn gradient_magnitude_field(&self, grid: &Grid2D, t: f64) -> Result<Field> {
        Self::sample(grid, |x, y| {
            let [gx, gy] = self.gradient(x, y, t);
            gx.hypot(gy)
        })
    }

    pub fn time_derivative_field(&self, grid: &Grid2D, t: f64) -> Result<Field> {
        Self::sample(grid, |x, y| self.time_derivative(x, y, t))
    }

    pub fn gradient_time_derivative_magnitude_field(&self, grid: &Grid2D, t: f64) -> Result<Field> {
        Self::sample(grid, |x, y| {
            let [gx, gy] = self.gradient_time_derivative(x, y, t);
            gx.hypot(gy)
        })
    }

    pub fn second_time_derivative_field(&self, grid: &Grid2D, t: f64) -> Result<Field> {
        Self::sample(grid, |x, y| self.second_time_derivative(x, y, t))
    }

    pub fn boundary_values(&self, grid: &Grid2D, t: f64) -> BoundaryValues {
        BoundaryValues::from_fn(grid, |x, y| self.value(x, y, t))
    }
}

/// Forcing term; only manufactured-solution checks use one.
#[derive(Debug, Clone)]
pub enum Source {
    Expr(Expr),
    Manufactured(Box<ManufacturedSolution>),
}

impl Source {
    fn field(&self, grid: &Grid2D, t: f64) -> Result<Field> {
        let vals = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (x, y) = grid.cell_center(k);
                match self {
                    Source::Expr(e) => Ok(e.eval(x, y, t)),
                    Source::Manufactured(m) => m.source(x, y, t),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Field::new(*grid, vals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardOptions {
    pub max_iter: usize,
    /// Relative max-norm update that ends the iteration.
    pub tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub law: ForchheimerLaw,
    pub porosity: Field,
    pub boundary: BoundaryData,
    pub initial: Field,
    pub t_end: f64,
    pub dt: f64,
    /// Store a snapshot every this many steps (the final step is always stored).
    pub snapshot_every: usize,
    pub picard: PicardOptions,
    pub source: Option<Source>,
}

impl Scenario {
    pub fn grid(&self) -> &Grid2D {
        self.law.grid()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.grid();
        if self.porosity.grid() != g || self.initial.grid() != g {
            return Err(Error::validation(
                "grid",
                "porosity, initial data and law use different grids",
            ));
        }
        if self.porosity.min() <= 0.0 {
            return Err(Error::validation(
                "porosity.field",
                format!("must be > 0 (min {})", self.porosity.min()),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("time.dt", "must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::validation("time.t_end", "must be positive"));
        }
        let n = self.t_end / self.dt;
        if (n - n.round()).abs() > 1e-6 * n.max(1.0) || n.round() < 1.0 {
            return Err(Error::validation(
                "time.dt",
                "t_end must be a whole number of steps",
            ));
        }
        if self.snapshot_every == 0 {
            return Err(Error::validation("time.snapshot_every", "must be >= 1"));
        }
        if self.picard.max_iter == 0 || !(self.picard.tol > 0.0) {
            return Err(Error::validation(
                "time.picard_max_iter",
                "need at least one iteration and a positive tolerance",
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn step_time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// Checks recorded for one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub picard_iterations: usize,
    pub cg_iterations: usize,
    /// `max|p^{n+1}| - max(max|p^n|, max|psi|)`, relative; only without a source.
    pub max_principle_excess: Option<f64>,
    /// Mismatch of `d/dt int phi p`, boundary flux and source, relative to the stencil terms.
    pub conservation_defect: f64,
    /// `int phi p^2` after the step.
    pub energy: f64,
}

#[derive(Debug)]
pub struct StepResult {
    pub p: Field,
    pub record: StepRecord,
}

/// Per-run integrator state: face coefficients precomputed from the law.
pub struct Simulator<'a> {
    sc: &'a Scenario,
    terms: usize,
    x_coeffs: Vec<f64>,
    y_coeffs: Vec<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(sc: &'a Scenario) -> Result<Self> {
        sc.validate()?;
        let law = &sc.law;
        let g = *sc.grid();
        let t = law.terms();
        let mut x_coeffs = vec![0.0; (g.nx + 1) * g.ny * t];
        let mut y_coeffs = vec![0.0; g.nx * (g.ny + 1) * t];
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let f = j * (g.nx + 1) + i;
                let k1 = g.idx(i.saturating_sub(1), j);
                let k2 = g.idx(i.min(g.nx - 1), j);
                law.face_coeffs(k1, k2, &mut x_coeffs[f * t..(f + 1) * t]);
            }
        }
        for j in 0..=g.ny {
            for i in 0..g.nx {
                let f = j * g.nx + i;
                let k1 = g.idx(i, j.saturating_sub(1));
                let k2 = g.idx(i, j.min(g.ny - 1));
                law.face_coeffs(k1, k2, &mut y_coeffs[f * t..(f + 1) * t]);
            }
        }
        Ok(Self {
            sc,
            terms: t,
            x_coeffs,
            y_coeffs,
        })
    }

    fn mobility(&self, coeffs: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        let t = self.terms;
        let law = &self.sc.law;
        if law.is_darcy() {
            return Ok(coeffs.chunks(t).map(|c| 1.0 / c[0]).collect());
        }
        xi.par_iter()
            .with_min_len(256)
            .enumerate()
            .map(|(f, &x)| law.with_coeffs(&coeffs[f * t..(f + 1) * t]).k(x))
            .collect()
    }

    /// Mobility on vertical and horizontal faces for the pressure `p` with boundary data `bv`.
    pub fn face_mobility(&self, p: &Field, bv: &BoundaryValues) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.sc.law.is_darcy() {
            return Ok((
                self.mobility(&self.x_coeffs, &[])?,
                self.mobility(&self.y_coeffs, &[])?,
            ));
        }
        let grad = gradient_field(p, Some(bv));
        let (cx, cy) = grad.cell_components();
        let mx = grad.x_face_magnitude(&cy);
        let my = grad.y_face_magnitude(&cx);
        Ok((
            self.mobility(&self.x_coeffs, &mx)?,
            self.mobility(&self.y_coeffs, &my)?,
        ))
    }

    fn transmissibilities(&self, kx: &[f64], ky: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = self.sc.grid();
        let (nx, ny) = (g.nx, g.ny);
        let (hx, hy) = (1.0 / (g.dx * g.dx), 1.0 / (g.dy * g.dy));
        let tx = kx
            .iter()
            .enumerate()
            .map(|(f, k)| {
                let i = f % (nx + 1);
                k * hx * if i == 0 || i == nx { 2.0 } else { 1.0 }
            })
            .collect();
        let ty = ky
            .iter()
            .enumerate()
            .map(|(f, k)| {
                let j = f / nx;
                k * hy * if j == 0 || j == ny { 2.0 } else { 1.0 }
            })
            .collect();
        (tx, ty)
    }

    /// Sum over boundary faces of `T_f * (psi_f - c_f * p_cell)` for each cell
    /// (`c_f = 1`), or just `T_f psi_f` when `with_cell` is false.
    fn boundary_terms(
        &self,
        tx: &[f64],
        ty: &[f64],
        bv: &BoundaryValues,
        p: Option<&[f64]>,
    ) -> Vec<f64> {
        let g = self.sc.grid();
        let (nx, ny) = (g.nx, g.ny);
        let mut out = vec![0.0; g.len()];
        let cell = |k: usize| p.map_or(0.0, |p| p[k]);
        for j in 0..ny {
            let kl = g.idx(0, j);
            let kr = g.idx(nx - 1, j);
            out[kl] += tx[j * (nx + 1)] * (bv.left[j] - cell(kl));
            out[kr] += tx[j * (nx + 1) + nx] * (bv.right[j] - cell(kr));
        }
        for i in 0..nx {
            let kb = g.idx(i, 0);
            let kt = g.idx(i, ny - 1);
            out[kb] += ty[i] * (bv.bottom[i] - cell(kb));
            out[kt] += ty[ny * nx + i] * (bv.top[i] - cell(kt));
        }
        out
    }

    /// One backward-Euler step from `p_n` at `t_next - dt` to `t_next`.
    pub fn step(&self, p_n: &Field, t_next: f64, dt: f64) -> Result<StepResult> {
        let sc = self.sc;
        let g = *sc.grid();
        let bv = sc.boundary.boundary_values(&g, t_next);
        let source = sc
            .source
            .as_ref()
            .map(|s| s.field(&g, t_next))
            .transpose()?;
        let phi = sc.porosity.values();
        let mass: Vec<f64> = phi.iter().map(|f| f / dt).collect();

        let mut guess = p_n.clone();
        let mut history = Vec::new();
        let mut cg_total = 0;
        for it in 1..=sc.picard.max_iter {
            let (kx, ky) = self.face_mobility(&guess, &bv)?;
            let (tx, ty) = self.transmissibilities(&kx, &ky);
            let bnd = self.boundary_terms(&tx, &ty, &bv, None);
            let mut diag = mass.clone();
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let k = g.idx(i, j);
                    diag[k] += tx[j * (g.nx + 1) + i]
                        + tx[j * (g.nx + 1) + i + 1]
                        + ty[j * g.nx + i]
                        + ty[(j + 1) * g.nx + i];
                }
            }
            let rhs: Vec<f64> = (0..g.len())
                .map(|k| {
                    mass[k] * p_n.values()[k]
                        + bnd[k]
                        + source.as_ref().map_or(0.0, |f| f.values()[k])
                })
                .collect();
            let a = StencilMatrix {
                grid: g,
                diag,
                tx,
                ty,
            };
            let mut next = guess.values().to_vec();
            let out = pcg(&a, &rhs, &mut next, CG_RTOL, 20 * g.len().max(100))?;
            cg_total += out.iterations;
            let next = Field::new(g, next)
                .map_err(|_| Error::LinearSolve("non-finite solution".into()))?;
            let scale = next.max_abs();
            let change = next
                .values()
                .iter()
                .zip(guess.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let update = if scale > 0.0 { change / scale } else { change };
            history.push(update);
            let done = sc.law.is_darcy() || update <= sc.picard.tol;
            if done {
                let record = self.checks(
                    p_n,
                    &next,
                    &a,
                    &bv,
                    source.as_ref(),
                    dt,
                    t_next,
                    it,
                    cg_total,
                );
                return Ok(StepResult { p: next, record });
            }
            guess = next;
        }
        Err(Error::Picard {
            time: t_next,
            history,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn checks(
        &self,
        p_n: &Field,
        p: &Field,
        a: &StencilMatrix,
        bv: &BoundaryValues,
        source: Option<&Field>,
        dt: f64,
        t: f64,
        picard_iterations: usize,
        cg_iterations: usize,
    ) -> StepRecord {
        let g = self.sc.grid();
        let phi = self.sc.porosity.values();
        let area = g.cell_area();
        let max_principle_excess = source.is_none().then(|| {
            let bound = p_n.max_abs().max(bv.max_abs());
            (p.max_abs() - bound) / bound.max(f64::MIN_POSITIVE)
        });
        let rate: Vec<f64> = phi
            .iter()
            .zip(p.values().iter().zip(p_n.values()))
            .map(|(f, (a, b))| f * (a - b) / dt)
            .collect();
        let flux_terms = self.boundary_terms(&a.tx, &a.ty, bv, Some(p.values()));
        let src = source.map_or(0.0, |f| pairwise_sum(f.values()));
        let mass_rate = pairwise_sum(&rate);
        let flux = pairwise_sum(&flux_terms);
        let size: f64 = phi
            .iter()
            .zip(p.values())
            .map(|(f, v)| (f * v / dt).abs())
            .sum::<f64>()
            + flux_terms.iter().map(|v| v.abs()).sum::<f64>()
            + source.map_or(0.0, |f| f.values().iter().map(|v| v.abs()).sum());
        let conservation_defect = if size > 0.0 {
            ((mass_rate - flux - src) / size).abs()
        } else {
            0.0
        };
        let e: Vec<f64> = phi.iter().zip(p.values()).map(|(f, v)| f * v * v).collect();
        let _ = area;
        StepRecord {
            time: t,
            picard_iterations,
            cg_iterations,
            max_principle_excess,
            conservation_defect,
            energy: pairwise_sum(&e) * g.cell_area(),
        }
    }
}

/// Snapshots of `p`, `pbar = p - Psi` and `pbar_t`, with per-step checks.
#[derive(Debug)]
pub struct RunOutput {
    pub p: SpaceTimeField,
    pub pbar: SpaceTimeField,
    pub pbar_t: SpaceTimeField,
    pub steps: Vec<StepRecord>,
    pub initial_energy: f64,
    /// Set when a step failed; snapshots stop before it.
    pub failure: Option<Error>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub max_picard_iterations: usize,
    pub max_cg_iterations: usize,
    /// Worst relative excess over the max-norm bound (`None` with a source).
    pub worst_max_principle_excess: Option<f64>,
    pub max_principle_holds: bool,
    pub worst_conservation_defect: f64,
    /// `int phi p^2` never increased (only meaningful for zero boundary data and no source).
    pub energy_non_increasing: bool,
    pub completed: bool,
}

impl RunOutput {
    /// Assembles the output from stored snapshots of `p`; the first snapshot
    /// must be the initial data at `t = 0`.
    pub fn from_snapshots(
        sc: &Scenario,
        times: Vec<f64>,
        snapshots: Vec<Field>,
        steps: Vec<StepRecord>,
        failure: Option<Error>,
    ) -> Result<Self> {
        let g = *sc.grid();
        let p = SpaceTimeField::new(g, times.clone(), snapshots)?;
        let e0: Vec<f64> = sc
            .porosity
            .values()
            .iter()
            .zip(p.slice(0).values())
            .map(|(f, v)| f * v * v)
            .collect();
        let initial_energy = pairwise_sum(&e0) * g.cell_area();
        let pbar_slices = p
            .slices()
            .iter()
            .zip(&times)
            .map(|(s, &t)| s.zip_map(&sc.boundary.field(&g, t)?, |a, b| a - b))
            .collect::<Result<Vec<_>>>()?;
        let pbar = SpaceTimeField::new(g, times, pbar_slices)?;
        let pbar_t = time_derivative(&pbar)?;
        Ok(Self {
            p,
            pbar,
            pbar_t,
            steps,
            initial_energy,
            failure,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    /// Turns a failed run into its error.
    pub fn into_complete(self) -> Result<Self> {
        match self.failure {
            None => Ok(self),
            Some(e) => Err(e),
        }
    }

    pub fn summary(&self) -> RunSummary {
        let worst_mp = self
            .steps
            .iter()
            .filter_map(|s| s.max_principle_excess)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        let mut energy_ok = true;
        let mut prev = self.initial_energy;
        for s in &self.steps {
            if s.energy > prev * (1.0 + 1e-10) + 1e-300 {
                energy_ok = false;
            }
            prev = s.energy;
        }
        RunSummary {
            steps: self.steps.len(),
            max_picard_iterations: self
                .steps
                .iter()
                .map(|s| s.picard_iterations)
                .max()
                .unwrap_or(0),
            max_cg_iterations: self
                .steps
                .iter()
                .map(|s| s.cg_iterations)
                .max()
                .unwrap_or(0),
            worst_max_principle_excess: worst_mp,
            max_principle_holds: worst_mp.is_none_or(|w| w <= MAX_PRINCIPLE_SLACK),
            worst_conservation_defect: self
                .steps
                .iter()
                .map(|s| s.conservation_defect)
                .fold(0.0, f64::max),
            energy_non_increasing: energy_ok,
            completed: self.failure.is_none(),
        }
    }
}

/// Centered differences in time, one-sided at the ends.
pub fn time_derivative(u: &SpaceTimeField) -> Result<SpaceTimeField> {
    let n = u.len();
    let times = u.times();
    let g = *u.grid();
    if n < 2 {
        return SpaceTimeField::new(g, times.to_vec(), vec![Field::zeros(g); n]);
    }
    let slices = (0..n)
        .map(|k| {
            let (lo, hi) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            let dt = times[hi] - times[lo];
            u.slice(hi).zip_map(u.slice(lo), |a, b| (a - b) / dt)
        })
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(g, times.to_vec(), slices)
}

/// Integrates the scenario to `t_end`, storing snapshots.
pub fn run(sc: &Scenario) -> Result<RunOutput> {
    let sim = Simulator::new(sc)?;
    let n_steps = sc.n_steps();
    let mut times = vec![0.0];
    let mut snaps = vec![sc.initial.clone()];
    let mut steps = Vec::with_capacity(n_steps);
    let mut p = sc.initial.clone();
    let mut failure = None;
    for n in 1..=n_steps {
        let t = sc.step_time(n);
        match sim.step(&p, t, sc.dt) {
            Ok(r) => {
                p = r.p;
                steps.push(r.record);
                if n % sc.snapshot_every == 0 || n == n_steps {
                    times.push(t);
                    snaps.push(p.clone());
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    RunOutput::from_snapshots(sc, times, snaps, steps, failure)
}

/// Cell-centered `|grad p|` of a snapshot, using the boundary data at time `t`.
pub fn pressure_gradient_magnitude(p: &Field, boundary: &BoundaryData, t: f64) -> Field {
    gradient_magnitude(p, Some(&boundary.boundary_values(p.grid(), t)))
}
