//! Right-hand sides of the a-priori estimates for `pbar = p - Psi` and
//! `pbar_t`, evaluated with every generic constant set to one, next to the
//! measured left-hand sides from a solver run. Boundedness of the ratio
//! (and its stability under data scaling) is what gets checked.

mod data;
mod exponents;
mod series;

pub use data::DataFunctionals;
pub use exponents::ExponentPack;
pub use series::TimeSeries;

use rayon::prelude::*;
use serde::Serialize;

use crate::constitutive::{build_weights, ForchheimerLaw, PointLaw, WeightSet};
use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Field};
use crate::solver::{pressure_gradient_magnitude, RunOutput, Scenario};
use crate::weighted_norms::weighted_power_integral;
use data::{sample_data, DataSeries};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_WINDOW: f64 = 5.0;
/// Spacing of the extra time nodes at which the boundary data is sampled.
const DATA_STEP: f64 = 1.0 / 32.0;
const H_RTOL: f64 = 1e-8;
const H_MAX_DEPTH: usize = 60;

/// `H(x, xi) = int_0^{xi^2} K(x, sqrt(sigma)) dsigma` in closed form.
pub fn compute_h(law: &PointLaw<'_>, xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("H needs xi >= 0, got {xi}")));
    }
    law.potential(xi)
}

/// The same integral by adaptive trapezoid in `sigma` to relative tolerance `1e-8`.
pub fn compute_h_trapezoid(law: &PointLaw<'_>, xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("H needs xi >= 0, got {xi}")));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    let f = |s: f64| law.k(s.sqrt());
    let top = xi * xi;
    // A bounded-below scale for the absolute tolerance: K is decreasing, so H >= K(xi) xi^2.
    let scale = f(top)? * top;
    let (fa, fb) = (f(0.0)?, f(top)?);
    let mut stack = vec![(0.0, top, fa, fb, 0usize)];
    let mut parts = Vec::new();
    while let Some((a, b, fa, fb, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        let coarse = 0.5 * (b - a) * (fa + fb);
        let fine = 0.25 * (b - a) * (fa + 2.0 * fm + fb);
        // Intervals whose whole contribution is negligible are accepted as they
        // are; this covers the non-smooth start of K(sqrt(sigma)) for exponents below one.
        let negligible = (b - a) * fa.max(fm).max(fb) <= 1e-3 * H_RTOL * scale;
        if negligible || (fine - coarse).abs() <= H_RTOL * scale * (b - a) / top {
            parts.push((a, fine + (fine - coarse) / 3.0));
        } else if depth >= H_MAX_DEPTH {
            return Err(Error::Quadrature(format!(
                "H at xi = {xi}: interval [{a}, {b}] not resolved"
            )));
        } else {
            stack.push((m, b, fm, fb, depth + 1));
            stack.push((a, m, fa, fm, depth + 1));
        }
    }
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(pairwise_sum(&parts.iter().map(|p| p.1).collect::<Vec<_>>()))
}

/// `int_U H(x, |grad p|) dx`.
pub fn h_integral(law: &ForchheimerLaw, grad: &Field) -> Result<f64> {
    let vals = (0..grad.grid().len())
        .into_par_iter()
        .map(|k| compute_h(&law.at_cell(k), grad.values()[k]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&vals) * grad.grid().cell_area())
}

/// One sample of a bound: measured left side, formula right side, ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPoint {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl BoundPoint {
    fn new(t: f64, lhs: f64, rhs: f64) -> Self {
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        Self { t, lhs, rhs, ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEntry {
    pub id: String,
    pub statement: String,
    pub points: Vec<BoundPoint>,
    /// Largest ratio; the constant that makes the bound hold on this run.
    pub fitted_c: f64,
    /// Every ratio is finite and non-negative.
    pub ratios_finite: bool,
}

impl BoundEntry {
    fn new(id: &str, statement: &str, points: Vec<BoundPoint>) -> Self {
        let ratios_finite = points.iter().all(|p| p.ratio.is_finite() && p.ratio >= 0.0);
        let fitted_c = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
        Self {
            id: id.into(),
            statement: statement.into(),
            points,
            fitted_c,
            ratios_finite,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,lhs,rhs,ratio\n");
        for p in &self.points {
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e}\n",
                p.t, p.lhs, p.rhs, p.ratio
            ));
        }
        s
    }

    /// Largest ratio among points with `t` in `[s, t]`.
    pub fn max_ratio_in(&self, s: f64, t: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.t >= s - 1e-9 && p.t <= t + 1e-9)
            .map(|p| p.ratio)
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DataSummary {
    pub b1: f64,
    pub b_star: f64,
    pub limit_a: f64,
    pub limit_b: f64,
    pub large_time_start: f64,
    pub window: f64,
    pub majorant_final: f64,
    /// `int H(|grad p(0)|) + int phi pbar(0)^2`.
    pub initial_energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub assumptions: Vec<String>,
    pub exponents: ExponentPack,
    pub c2: f64,
    pub data: DataSummary,
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn entry(&self, id: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Solver output plus everything derived from it that the bound formulas need.
pub struct BoundsContext {
    pack: ExponentPack,
    c2: f64,
    weights: WeightSet,
    data: DataSeries,
    /// `int a_N^{r1'} phi^{1-r1'}`.
    n1_base: f64,
    /// `int phi pbar^2` at the snapshots.
    energy: TimeSeries,
    /// `int phi pbar_t^2` at the snapshots.
    rate_energy: TimeSeries,
    /// `int W1 |grad p|^{2-a}` at the snapshots.
    w1_grad: TimeSeries,
    /// `int H(|grad p|)` at the snapshots.
    h_energy: TimeSeries,
    pbar_max: TimeSeries,
    rate_max: TimeSeries,
}

fn merged_times(snapshots: &[f64]) -> Vec<f64> {
    let t_end = *snapshots.last().expect("non-empty");
    let n = (t_end / DATA_STEP).ceil().max(64.0) as usize;
    let mut all: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
    all.extend_from_slice(snapshots);
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    all
}

impl BoundsContext {
    pub fn new(
        sc: &Scenario,
        run: &RunOutput,
        pack: ExponentPack,
        c2: f64,
        window: f64,
    ) -> Result<Self> {
        if !run.is_complete() {
            return Err(Error::MissingArtifact(
                "run stopped early; bounds need the full horizon".into(),
            ));
        }
        if run.p.len() < 2 {
            return Err(Error::MissingArtifact("need at least two snapshots".into()));
        }
        if !(c2 > 0.0 && c2.is_finite()) {
            return Err(Error::validation(
                "exponents.c2",
                "Sobolev constant must be positive",
            ));
        }
        let law = &sc.law;
        let weights = build_weights(law)?;
        if (weights.a - pack.a).abs() > 1e-12 {
            return Err(Error::validation(
                "exponents.a",
                format!("pack uses a = {}, the law has a = {}", pack.a, weights.a),
            ));
        }
        let phi = &sc.porosity;
        let times = run.p.times().to_vec();
        let data = sample_data(
            &sc.boundary,
            &weights,
            law.a0(),
            law.a_top(),
            phi,
            &pack,
            merged_times(&times),
            window,
        )?;
        let r1c = pack.r1_conj;
        let n1_base = pairwise_sum(
            &law.a_top()
                .values()
                .iter()
                .zip(phi.values())
                .map(|(an, f)| an.powf(r1c) * f.powf(1.0 - r1c))
                .collect::<Vec<_>>(),
        ) * phi.grid().cell_area();

        let q = 2.0 - pack.a;
        let per_snapshot = (0..run.p.len())
            .into_par_iter()
            .map(|n| {
                let t = times[n];
                let grad = pressure_gradient_magnitude(run.p.slice(n), &sc.boundary, t);
                let w1 = weighted_power_integral(&grad, &weights.w1, q)?;
                let h = h_integral(law, &grad)?;
                let e = weighted_power_integral(run.pbar.slice(n), phi, 2.0)?;
                let re = weighted_power_integral(run.pbar_t.slice(n), phi, 2.0)?;
                Ok([
                    e,
                    re,
                    w1,
                    h,
                    run.pbar.slice(n).max_abs(),
                    run.pbar_t.slice(n).max_abs(),
                ])
            })
            .collect::<Result<Vec<[f64; 6]>>>()?;
        let col =
            |i: usize| TimeSeries::new(times.clone(), per_snapshot.iter().map(|v| v[i]).collect());
        Ok(Self {
            pack,
            c2,
            weights,
            data,
            n1_base,
            energy: col(0)?,
            rate_energy: col(1)?,
            w1_grad: col(2)?,
            h_energy: col(3)?,
            pbar_max: col(4)?,
            rate_max: col(5)?,
        })
    }

    pub fn data(&self) -> &DataFunctionals {
        &self.data.functionals
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    pub fn t_end(&self) -> f64 {
        self.energy.end()
    }

    /// `max(1, int a_N^{r1'} phi^{1-r1'}) + int_s^t int [(W1|grad Psi|^{2-a} + |grad Psi|^2/a0)^{r1'} phi^{1-r1'} + |Psi_t|^{2r1'} phi]`.
    pub fn n1(&self, s: f64, t: f64) -> f64 {
        self.n1_base.max(1.0) + self.data.n1_grad.integral(s, t) + self.data.n1_rate.integral(s, t)
    }

    /// `1 + ||a0^{-1/2} grad Psi_t||_{L^{2r2}_phi(U x (s,t))} + ||Psi_tt||_{L^{2r2}_phi(U x (s,t))}`.
    pub fn n2(&self, s: f64, t: f64) -> f64 {
        let e = 1.0 / (2.0 * self.pack.r2);
        1.0 + self.data.n2_grad.integral(s, t).powf(e) + self.data.n2_tt.integral(s, t).powf(e)
    }

    /// `omega_{T0,T}` for the cylinder `U x (T0, T0 + T)`.
    pub fn omega(&self, t0: f64, t: f64) -> f64 {
        let r1c = self.pack.r1_conj;
        t * self.n1_base
            + t.powf(r1c) * self.data.n1_rate.integral(t0, t0 + t)
            + self.data.n1_grad.integral(t0, t0 + t)
    }

    /// `(B1 + sup over [T0 + theta T, T0 + T] of int W1 |grad p|^{2-a})^{a r' / (4(2-a))}`.
    pub fn s_functional(&self, t0: f64, t: f64, theta: f64) -> f64 {
        let p = &self.pack;
        let sup = self
            .w1_grad
            .indices_in(t0 + theta * t, t0 + t)
            .map(|k| self.w1_grad.values[k])
            .fold(0.0, f64::max);
        (self.data().b1 + sup).powf(p.a * p.r_conj / (4.0 * (2.0 - p.a)))
    }

    /// `||a0^{-1/2} grad Psi_t||_{L^{2r2}_phi} + T^{1/2} ||Psi_tt||_{L^{2r2}_phi}` on the cylinder.
    pub fn z_functional(&self, t0: f64, t: f64) -> f64 {
        let e = 1.0 / (2.0 * self.pack.r2);
        self.data.n2_grad.integral(t0, t0 + t).powf(e)
            + t.sqrt() * self.data.n2_tt.integral(t0, t0 + t).powf(e)
    }

    /// `int H(|grad p(0)|) + int phi pbar(0)^2`.
    pub fn initial_energy(&self) -> f64 {
        self.h_energy.values[0] + self.energy.values[0]
    }

    fn sup_over(series: &TimeSeries, s: f64, t: f64) -> Option<f64> {
        series
            .indices_in(s, t)
            .map(|k| series.values[k])
            .reduce(f64::max)
    }

    /// Max of `|pbar|` over snapshots in `[s, t]`.
    pub fn sup_pbar(&self, s: f64, t: f64) -> Option<f64> {
        Self::sup_over(&self.pbar_max, s, t)
    }

    /// Max of `|pbar_t|` over snapshots in `[s, t]`.
    pub fn sup_rate(&self, s: f64, t: f64) -> Option<f64> {
        Self::sup_over(&self.rate_max, s, t)
    }

    /// `||pbar||_{L^2_phi(U x (T0, T0 + T))}`.
    pub fn pbar_cylinder_norm(&self, t0: f64, t: f64) -> f64 {
        self.energy.integral(t0, t0 + t).sqrt()
    }

    /// `||pbar_t||_{L^2_phi(U x (T0, T0 + T))}`.
    pub fn rate_cylinder_norm(&self, t0: f64, t: f64) -> f64 {
        self.rate_energy.integral(t0, t0 + t).sqrt()
    }

    fn eval_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.energy.times.iter().copied().filter(|&t| t > 0.0)
    }

    /// Cylinder bound for `sup |pbar|` on `U x (T0 + theta T, T0 + T)`.
    pub fn pressure_cylinder_point(&self, t0: f64, t: f64, theta: f64) -> Option<BoundPoint> {
        let p = &self.pack;
        let q = 2.0 - p.a;
        let lhs = self.sup_pbar(t0 + theta * t, t0 + t)?;
        let tt = theta * t;
        let norm = self.pbar_cylinder_norm(t0, t);
        let rhs = self.c2.max(1.0).powf(q / (p.r0 - 2.0))
            * (tt.powf(-0.5) + tt.powf(-1.0 / q)).powf(p.kappa1)
            * (1.0 + self.omega(t0, t)).powf(p.kappa2)
            * (norm.powf(p.nu1) + norm.powf(p.nu2));
        Some(BoundPoint::new(t0 + t, lhs, rhs))
    }

    /// Cylinder bound for `sup |pbar_t|` on `U x (T0 + theta T, T0 + T)`.
    pub fn rate_cylinder_point(&self, t0: f64, t: f64, theta: f64) -> Option<BoundPoint> {
        let p = &self.pack;
        let lhs = self.sup_rate(t0 + theta * t, t0 + t)?;
        let s = self.s_functional(t0, t, theta);
        let z = self.z_functional(t0, t);
        let norm = self.rate_cylinder_norm(t0, t);
        let rhs = self.c2.max(1.0).powf(p.r / (p.r - 2.0))
            * (((theta * t).powf(-0.5) * s).powf(1.0 / p.delta1)
                + (z * s).powf(1.0 / (1.0 + p.delta2)))
            * (norm + norm.powf(p.delta2 / (1.0 + p.delta2)));
        Some(BoundPoint::new(t0 + t, lhs, rhs))
    }

    fn cylinders(&self) -> Vec<(f64, f64)> {
        let t_end = self.t_end();
        let len = t_end.min(1.0);
        let mut out = Vec::new();
        let mut t0 = 0.0;
        while t0 + len <= t_end * (1.0 + 1e-12) {
            out.push((t0, len));
            t0 += 0.5 * len;
        }
        out
    }

    /// Every bound, evaluated at every admissible snapshot time.
    pub fn evaluate(&self) -> Result<BoundReport> {
        let p = self.pack;
        let a = p.a;
        let q = 2.0 - a;
        let d = self.data();
        let m = |t: f64| d.majorant.at(t);
        let g = |t: f64| d.g.at(t);
        let g1_int = |s: f64, t: f64| d.g1.integral(s, t);
        let e0 = self.energy.values[0];
        let pbar0 = e0.sqrt();
        let a0_energy = self.initial_energy();
        let t_end = self.t_end();
        let big_t = d.large_time_start;
        let w_start = d.window_start();
        let times: Vec<f64> = self.eval_times().collect();
        let mut entries = Vec::new();

        // Weighted L^2 of pbar.
        entries.push(BoundEntry::new(
            "l2_energy",
            "int phi pbar(t)^2 <= int phi pbar(0)^2 + M(t)^{2/(2-a)}",
            times
                .iter()
                .map(|&t| BoundPoint::new(t, self.energy.at(t), e0 + m(t).powf(2.0 / q)))
                .collect(),
        ));
        entries.push(BoundEntry::new(
            "l2_limit",
            "limsup int phi pbar^2 <= A^{2/(2-a)} (trailing-window max)",
            vec![BoundPoint::new(
                t_end,
                self.energy.max_over(w_start, t_end),
                d.limit_a.powf(2.0 / q),
            )],
        ));
        entries.push(BoundEntry::new(
            "l2_large_time",
            "int phi pbar(t)^2 <= B^{1/(1-a)} + G(t)^{2/(2-a)} for t > T",
            times
                .iter()
                .filter(|&&t| t > big_t)
                .map(|&t| {
                    BoundPoint::new(
                        t,
                        self.energy.at(t),
                        d.limit_b.powf(1.0 / (1.0 - a)) + g(t).powf(2.0 / q),
                    )
                })
                .collect(),
        ));

        // Gradient energy int W1 |grad p|^{2-a}.
        let h0 = self.h_energy.values[0];
        entries.push(BoundEntry::new(
            "grad_energy",
            "int W1 |grad p|^{2-a} <= e^{-t/4} int H(|grad p(0)|) + int phi pbar(0)^2 + M(t)^{2/(2-a)} + int_0^t e^{-(t-s)/4} G1(s) ds",
            times
                .iter()
                .map(|&t| {
                    let conv = d.g1.weighted_integral(0.0, t, |s| (-(t - s) / 4.0).exp());
                    BoundPoint::new(t, self.w1_grad.at(t), (-t / 4.0).exp() * h0 + e0 + m(t).powf(2.0 / q) + conv)
                })
                .collect(),
        ));
        entries.push(BoundEntry::new(
            "grad_unit_window",
            "int W1 |grad p|^{2-a} <= int phi pbar(0)^2 + M(t)^{2/(2-a)} + int_{t-1}^t G1 for t >= 1",
            times
                .iter()
                .filter(|&&t| t >= 1.0)
                .map(|&t| BoundPoint::new(t, self.w1_grad.at(t), e0 + m(t).powf(2.0 / q) + g1_int(t - 1.0, t)))
                .collect(),
        ));
        let late: Vec<f64> = times
            .iter()
            .copied()
            .filter(|&t| t >= w_start.max(1.0))
            .collect();
        if !late.is_empty() {
            let g1_late = late.iter().map(|&t| g1_int(t - 1.0, t)).fold(0.0, f64::max);
            entries.push(BoundEntry::new(
                "grad_limit",
                "limsup int W1 |grad p|^{2-a} <= A^{2/(2-a)} + limsup int_{t-1}^t G1 (trailing-window max)",
                vec![BoundPoint::new(
                    t_end,
                    self.w1_grad.max_over(w_start.max(1.0), t_end),
                    d.limit_a.powf(2.0 / q) + g1_late,
                )],
            ));
        }
        entries.push(BoundEntry::new(
            "grad_large_time",
            "int W1 |grad p|^{2-a} <= B^{1/(1-a)} + G(t)^{2/(2-a)} + int_{t-1}^t G1 for t > T",
            times
                .iter()
                .filter(|&&t| t > big_t)
                .map(|&t| {
                    BoundPoint::new(
                        t,
                        self.w1_grad.at(t),
                        d.limit_b.powf(1.0 / (1.0 - a)) + g(t).powf(2.0 / q) + g1_int(t - 1.0, t),
                    )
                })
                .collect(),
        ));
        entries.push(BoundEntry::new(
            "uniform_gronwall",
            "int H(|grad p(t)|) + 1/2 int_{t-1/2}^t int phi pbar_t^2 <= int phi pbar(t-1)^2 + int_{t-1}^t (G + G1) for t >= 1",
            times
                .iter()
                .filter(|&&t| t >= 1.0)
                .map(|&t| {
                    let lhs = self.h_energy.at(t) + 0.5 * self.rate_energy.integral(t - 0.5, t);
                    let rhs = self.energy.at(t - 1.0) + d.g.integral(t - 1.0, t) + g1_int(t - 1.0, t);
                    BoundPoint::new(t, lhs, rhs)
                })
                .collect(),
        ));

        // Sup of pbar.
        entries.push(BoundEntry::new(
            "sup_cylinder",
            "sup |pbar| on U x (T0 + T/2, T0 + T), generic cylinder bound with theta = 1/2",
            self.cylinders()
                .iter()
                .filter_map(|&(t0, t)| self.pressure_cylinder_point(t0, t, 0.5))
                .collect(),
        ));
        let data_term = |t: f64| (pbar0 + m(t).powf(1.0 / q)).powf(p.nu2);
        entries.push(BoundEntry::new(
            "sup_small_time",
            "sup_{(t/2,t)} |pbar| <= t^{-kappa3} N1(0,t)^{kappa2} (||pbar(0)|| + M(t)^{1/(2-a)})^{nu2} for t < 1",
            times
                .iter()
                .filter(|&&t| t < 1.0)
                .filter_map(|&t| {
                    let lhs = self.sup_pbar(0.5 * t, t)?;
                    Some(BoundPoint::new(t, lhs, t.powf(-p.kappa3) * self.n1(0.0, t).powf(p.kappa2) * data_term(t)))
                })
                .collect(),
        ));
        entries.push(BoundEntry::new(
            "sup_unit_window",
            "sup_{(t-1/2,t)} |pbar| <= N1(t-1,t)^{kappa2} (||pbar(0)|| + M(t)^{1/(2-a)})^{nu2} for t >= 1",
            times
                .iter()
                .filter(|&&t| t >= 1.0)
                .filter_map(|&t| {
                    let lhs = self.sup_pbar(t - 0.5, t)?;
                    Some(BoundPoint::new(t, lhs, self.n1(t - 1.0, t).powf(p.kappa2) * data_term(t)))
                })
                .collect(),
        ));
        if !late.is_empty() {
            let n1_late = late
                .iter()
                .map(|&t| self.n1(t - 1.0, t))
                .fold(0.0, f64::max);
            let lhs = self.sup_pbar(late[0] - 0.5, t_end).unwrap_or(0.0);
            entries.push(BoundEntry::new(
                "sup_limit",
                "limsup sup_{(t-1/2,t)} |pbar| <= (limsup N1(t-1,t))^{kappa2} A^{nu2/(2-a)} (trailing-window max)",
                vec![BoundPoint::new(t_end, lhs, n1_late.powf(p.kappa2) * d.limit_a.powf(p.nu2 / q))],
            ));
        }
        entries.push(BoundEntry::new(
            "sup_large_time",
            "sup_{(t-1/2,t)} |pbar| <= N1(t-1,t)^{kappa2} (B^{1/(2(1-a))} + G(t)^{1/(2-a)})^{nu2} for t > T",
            times
                .iter()
                .filter(|&&t| t > big_t && t >= 1.0)
                .filter_map(|&t| {
                    let lhs = self.sup_pbar(t - 0.5, t)?;
                    let rhs = self.n1(t - 1.0, t).powf(p.kappa2)
                        * (d.limit_b.powf(1.0 / (2.0 * (1.0 - a))) + g(t).powf(1.0 / q)).powf(p.nu2);
                    Some(BoundPoint::new(t, lhs, rhs))
                })
                .collect(),
        ));

        // Sup of pbar_t.
        let n2_pow = 1.0 / (1.0 + p.delta2);
        entries.push(BoundEntry::new(
            "rate_cylinder",
            "sup |pbar_t| on U x (T0 + T/2, T0 + T), generic cylinder bound with theta = 1/2",
            self.cylinders()
                .iter()
                .filter_map(|&(t0, t)| self.rate_cylinder_point(t0, t, 0.5))
                .collect(),
        ));
        entries.push(BoundEntry::new(
            "rate_small_time",
            "sup_{(t/2,t)} |pbar_t| <= t^{-1/(2 delta1)} N2(0,t)^{1/(1+delta2)} (A0 + M(t)^{2/(2-a)} + int_0^t G1)^{kappa4} for t < 3/2",
            times
                .iter()
                .filter(|&&t| t < 1.5)
                .filter_map(|&t| {
                    let lhs = self.sup_rate(0.5 * t, t)?;
                    let rhs = t.powf(-0.5 / p.delta1)
                        * self.n2(0.0, t).powf(n2_pow)
                        * (a0_energy + m(t).powf(2.0 / q) + g1_int(0.0, t)).powf(p.kappa4);
                    Some(BoundPoint::new(t, lhs, rhs))
                })
                .collect(),
        ));
        entries.push(BoundEntry::new(
            "rate_late",
            "sup_{(t-1/4,t)} |pbar_t| <= N2(t-1/2,t)^{1/(1+delta2)} (||pbar(0)||^2 + M(t)^{2/(2-a)} + int_{t-5/4}^t G1)^{kappa4} for t >= 3/2",
            times
                .iter()
                .filter(|&&t| t >= 1.5)
                .filter_map(|&t| {
                    let lhs = self.sup_rate(t - 0.25, t)?;
                    let rhs = self.n2(t - 0.5, t).powf(n2_pow)
                        * (e0 + m(t).powf(2.0 / q) + g1_int(t - 1.25, t)).powf(p.kappa4);
                    Some(BoundPoint::new(t, lhs, rhs))
                })
                .collect(),
        ));
        if !late.is_empty() {
            let n2_late = late
                .iter()
                .map(|&t| self.n2(t - 0.5, t))
                .fold(0.0, f64::max);
            let g1_late = late.iter().map(|&t| g1_int(t - 1.0, t)).fold(0.0, f64::max);
            let lhs = self.sup_rate(late[0] - 0.25, t_end).unwrap_or(0.0);
            entries.push(BoundEntry::new(
                "rate_limit",
                "limsup sup_{(t-1/4,t)} |pbar_t| <= (limsup N2)^{1/(1+delta2)} (A^{2/(2-a)} + limsup int_{t-1}^t G1)^{kappa4} (trailing-window max)",
                vec![BoundPoint::new(
                    t_end,
                    lhs,
                    n2_late.powf(n2_pow) * (d.limit_a.powf(2.0 / q) + g1_late).powf(p.kappa4),
                )],
            ));
        }
        entries.push(BoundEntry::new(
            "rate_large_time",
            "sup_{(t-1/4,t)} |pbar_t| <= N2(t-1/2,t)^{1/(1+delta2)} (B^{1/(1-a)} + G(t)^{2/(2-a)} + int_{t-5/4}^t G1)^{kappa4} for t > T",
            times
                .iter()
                .filter(|&&t| t > big_t && t >= 1.5)
                .filter_map(|&t| {
                    let lhs = self.sup_rate(t - 0.25, t)?;
                    let rhs = self.n2(t - 0.5, t).powf(n2_pow)
                        * (d.limit_b.powf(1.0 / (1.0 - a)) + g(t).powf(2.0 / q) + g1_int(t - 1.25, t)).powf(p.kappa4);
                    Some(BoundPoint::new(t, lhs, rhs))
                })
                .collect(),
        ));

        Ok(BoundReport {
            schema_version: SCHEMA_VERSION,
            assumptions: vec![
                "H(x, xi) is taken as the integral of K(x, sqrt(sigma)) over sigma in [0, xi^2]".into(),
                "every generic constant is set to 1; only ratio boundedness is meaningful".into(),
                "limits as t -> infinity are replaced by maxima over the trailing window".into(),
                "the large-time start T is the first time >= 1 after which the tail max of [G']^- is within 10% of B".into(),
                "M(t) is the running maximum of G sampled on the data time grid".into(),
            ],
            exponents: p,
            c2: self.c2,
            data: DataSummary {
                b1: d.b1,
                b_star: d.b_star,
                limit_a: d.limit_a,
                limit_b: d.limit_b,
                large_time_start: big_t,
                window: d.window,
                majorant_final: *d.majorant.values.last().expect("non-empty"),
                initial_energy: a0_energy,
            },
            entries,
        })
    }
}

/// `max / min` of the fitted constants of one bound across several runs;
/// zero constants (runs where the measured side vanished) are skipped.
pub fn fitted_c_spread(reports: &[BoundReport], id: &str) -> Option<f64> {
    let cs: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.entry(id))
        .map(|e| e.fitted_c)
        .filter(|c| *c > 0.0)
        .collect();
    if cs.is_empty() {
        return None;
    }
    let max = cs.iter().copied().fold(f64::MIN, f64::max);
    let min = cs.iter().copied().fold(f64::MAX, f64::min);
    Some(max / min)
}

#[cfg(test)]
mod tests;
