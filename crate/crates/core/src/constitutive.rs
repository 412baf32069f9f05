//! Generalized Forchheimer constitutive law `g(x, s) = sum_i a_i(x) s^alpha_i`,
//! its inversion `s g(x, s) = xi`, the mobility `K(x, xi) = 1 / g(x, s(x, xi))`
//! and the coefficient-derived weights that sandwich `K`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid2D};

const INVERSION_RTOL: f64 = 1e-12;
const INVERSION_MAX_ITER: usize = 200;

/// Power of a non-negative base, using `powi` for integral exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Power {
    exponent: f64,
    integral: Option<i32>,
}

impl Power {
    fn new(exponent: f64) -> Self {
        let integral =
            (exponent.fract() == 0.0 && exponent.abs() < 64.0).then_some(exponent as i32);
        Self { exponent, integral }
    }

    #[inline]
    fn apply(&self, base: f64) -> f64 {
        match self.integral {
            Some(0) => 1.0,
            Some(n) => base.powi(n),
            None => base.powf(self.exponent),
        }
    }
}

/// The law frozen at a single location: exponents plus local coefficient values.
#[derive(Debug, Clone, Copy)]
pub struct PointLaw<'a> {
    powers: &'a [Power],
    coeffs: &'a [f64],
}

impl<'a> PointLaw<'a> {
    pub fn a0(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn a_top(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    pub fn degree(&self) -> f64 {
        self.powers[self.powers.len() - 1].exponent
    }

    /// `g(s)` without the sign check.
    #[inline]
    pub fn g_unchecked(&self, s: f64) -> f64 {
        self.powers
            .iter()
            .zip(self.coeffs)
            .map(|(p, &c)| if c == 0.0 { 0.0 } else { c * p.apply(s) })
            .sum()
    }

    pub fn g(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("g(s) needs s >= 0, got {s}")));
        }
        Ok(self.g_unchecked(s))
    }

    /// `g'(s)`; infinite at `s = 0` when a fractional exponent below one is active.
    pub fn dg(&self, s: f64) -> f64 {
        self.powers
            .iter()
            .zip(self.coeffs)
            .skip(1)
            .map(|(p, &c)| {
                if c == 0.0 {
                    0.0
                } else {
                    c * p.exponent * Power::new(p.exponent - 1.0).apply(s)
                }
            })
            .sum()
    }

    /// Unique `s >= 0` with `s g(s) = xi`.
    ///
    /// `s g(s)` is convex and increasing, so Newton started from an upper
    /// bound decreases monotonically onto the root; the bracket
    /// `[0, max(xi/a0, (xi/aN)^(1/(1+deg))) + 1]` guards every step and a
    /// bisection step replaces any Newton step that leaves it.
    pub fn solve_s(&self, xi: f64) -> Result<f64> {
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(Error::Domain(format!(
                "inversion needs finite xi >= 0, got {xi}"
            )));
        }
        if xi == 0.0 {
            return Ok(0.0);
        }
        let lin = xi / self.a0();
        let top = (xi / self.a_top()).powf(1.0 / (1.0 + self.degree()));
        let mut lo = 0.0;
        let mut hi = lin.max(top) + 1.0;
        let mut s = lin.min(top);
        let mut residual = f64::INFINITY;
        for _ in 0..INVERSION_MAX_ITER {
            let g = self.g_unchecked(s);
            residual = s * g - xi;
            if residual.abs() <= INVERSION_RTOL * xi {
                return Ok(s);
            }
            if residual > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let slope = g + s * self.dg(s);
            let mut next = s - residual / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 4.0 * f64::EPSILON * s || hi - lo <= 4.0 * f64::EPSILON * hi {
                // Converged to machine resolution; keep whichever end is closer.
                let rn = (next * self.g_unchecked(next) - xi).abs();
                return Ok(if rn < residual.abs() { next } else { s });
            }
            s = next;
        }
        Err(Error::Inversion {
            target: xi,
            iterations: INVERSION_MAX_ITER,
            residual,
        })
    }

    pub fn k(&self, xi: f64) -> Result<f64> {
        let s = self.solve_s(xi)?;
        Ok(1.0 / self.g_unchecked(s))
    }

    /// `H(xi) = int_0^{xi^2} K(sqrt(sigma)) dsigma`, integrated exactly after
    /// the change of variable `tau = s g(s)`:
    /// `sum_i a_i 2 (1 + alpha_i) / (alpha_i + 2) s^(alpha_i + 2)`.
    pub fn potential(&self, xi: f64) -> Result<f64> {
        let s = self.solve_s(xi)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        Ok(self
            .powers
            .iter()
            .zip(self.coeffs)
            .map(|(p, &c)| {
                let e = p.exponent;
                c * 2.0 * (1.0 + e) / (e + 2.0) * s * s * p.apply(s)
            })
            .sum())
    }

    /// Analytic `dK/dxi = -g'(s) / (g(s)^2 (g(s) + s g'(s)))`.
    pub fn dk_dxi(&self, xi: f64) -> Result<f64> {
        let s = self.solve_s(xi)?;
        let g = self.g_unchecked(s);
        let dg = self.dg(s);
        Ok(-dg / (g * g * (g + s * dg)))
    }
}

/// Exponent list detached from any coefficient field, for evaluating the
/// law with coefficients that come from elsewhere (analytic expressions).
#[derive(Debug, Clone)]
pub struct Exponents {
    powers: Vec<Power>,
}

impl Exponents {
    pub fn new(exponents: &[f64]) -> Result<Self> {
        if exponents.first() != Some(&0.0) {
            return Err(Error::validation(
                "law.exponents",
                "first exponent must be exactly 0",
            ));
        }
        if exponents.windows(2).any(|w| !(w[1] > w[0])) || exponents.iter().any(|e| !e.is_finite())
        {
            return Err(Error::validation(
                "law.exponents",
                "exponents must be finite and strictly increasing",
            ));
        }
        Ok(Self {
            powers: exponents.iter().map(|&e| Power::new(e)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn at<'a>(&'a self, coeffs: &'a [f64]) -> PointLaw<'a> {
        debug_assert_eq!(coeffs.len(), self.powers.len());
        PointLaw {
            powers: &self.powers,
            coeffs,
        }
    }
}

/// Exponents `0 = alpha_0 < ... < alpha_N` with coefficient fields `a_i(x)`.
#[derive(Debug, Clone)]
pub struct ForchheimerLaw {
    exponents: Vec<f64>,
    powers: Vec<Power>,
    coefficients: Vec<Field>,
    /// Cell-major copy of the coefficients, `terms` values per cell.
    cell_coeffs: Vec<f64>,
    darcy: bool,
}

impl ForchheimerLaw {
    pub fn new(exponents: Vec<f64>, coefficients: Vec<Field>) -> Result<Self> {
        if exponents.len() < 2 {
            return Err(Error::validation(
                "law.exponents",
                "need at least two terms; use the Darcy validation mode for a constant law",
            ));
        }
        Self::build(exponents, coefficients, false)
    }

    /// One-term law `g = a0(x)`. Only meant for manufactured-solution and
    /// eigenfunction checks; weights and bounds are undefined for it.
    pub fn darcy(a0: Field) -> Result<Self> {
        Self::build(vec![0.0], vec![a0], true)
    }

    fn build(exponents: Vec<f64>, coefficients: Vec<Field>, darcy: bool) -> Result<Self> {
        if exponents.first() != Some(&0.0) {
            return Err(Error::validation(
                "law.exponents",
                "first exponent must be exactly 0",
            ));
        }
        if exponents.iter().any(|e| !e.is_finite()) {
            return Err(Error::validation(
                "law.exponents",
                "exponents must be finite",
            ));
        }
        if let Some(w) = exponents.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::validation(
                "law.exponents",
                format!(
                    "exponents must be strictly increasing (entry {} <= entry {})",
                    w + 1,
                    w
                ),
            ));
        }
        if coefficients.len() != exponents.len() {
            return Err(Error::validation(
                "law.coefficients",
                format!(
                    "{} coefficient fields for {} exponents",
                    coefficients.len(),
                    exponents.len()
                ),
            ));
        }
        let grid = *coefficients[0].grid();
        if coefficients.iter().any(|c| *c.grid() != grid) {
            return Err(Error::validation(
                "law.coefficients",
                "coefficient fields on different grids",
            ));
        }
        let last = coefficients.len() - 1;
        for (i, c) in coefficients.iter().enumerate() {
            let positive = i == 0 || i == last;
            let bad = if positive {
                c.min() <= 0.0
            } else {
                c.min() < 0.0
            };
            if bad {
                let need = if positive { "> 0" } else { ">= 0" };
                return Err(Error::validation(
                    format!("law.coefficients[{i}]"),
                    format!("must be {need} everywhere (min {})", c.min()),
                ));
            }
        }
        let terms = exponents.len();
        let mut cell_coeffs = vec![0.0; grid.len() * terms];
        for (i, c) in coefficients.iter().enumerate() {
            for (k, &v) in c.values().iter().enumerate() {
                cell_coeffs[k * terms + i] = v;
            }
        }
        Ok(Self {
            powers: exponents.iter().map(|&e| Power::new(e)).collect(),
            exponents,
            coefficients,
            cell_coeffs,
            darcy,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        self.coefficients[0].grid()
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn coefficients(&self) -> &[Field] {
        &self.coefficients
    }

    pub fn is_darcy(&self) -> bool {
        self.darcy
    }

    /// Number of nonconstant terms, `N`.
    pub fn n_terms(&self) -> usize {
        self.exponents.len() - 1
    }

    pub fn degree(&self) -> f64 {
        *self.exponents.last().expect("validated non-empty")
    }

    /// `a = deg / (deg + 1)`.
    pub fn exponent_a(&self) -> f64 {
        let d = self.degree();
        d / (d + 1.0)
    }

    pub fn a0(&self) -> &Field {
        &self.coefficients[0]
    }

    pub fn a_top(&self) -> &Field {
        &self.coefficients[self.coefficients.len() - 1]
    }

    pub fn terms(&self) -> usize {
        self.exponents.len()
    }

    /// Law at cell `k`.
    pub fn at_cell(&self, k: usize) -> PointLaw<'_> {
        let t = self.terms();
        PointLaw {
            powers: &self.powers,
            coeffs: &self.cell_coeffs[k * t..(k + 1) * t],
        }
    }

    /// Law with coefficients supplied by the caller, e.g. interpolated to a face.
    pub fn with_coeffs<'a>(&'a self, coeffs: &'a [f64]) -> PointLaw<'a> {
        debug_assert_eq!(coeffs.len(), self.terms());
        PointLaw {
            powers: &self.powers,
            coeffs,
        }
    }

    /// Writes the linear interpolation of the coefficients of cells `k1`, `k2`
    /// (the face between them) into `out`.
    pub fn face_coeffs(&self, k1: usize, k2: usize, out: &mut [f64]) {
        let t = self.terms();
        let c1 = &self.cell_coeffs[k1 * t..(k1 + 1) * t];
        let c2 = &self.cell_coeffs[k2 * t..(k2 + 1) * t];
        for ((o, a), b) in out.iter_mut().zip(c1).zip(c2) {
            *o = 0.5 * (a + b);
        }
    }

    pub fn eval_g(&self, k: usize, s: f64) -> Result<f64> {
        self.at_cell(k).g(s)
    }

    pub fn solve_s(&self, k: usize, xi: f64) -> Result<f64> {
        self.at_cell(k).solve_s(xi)
    }

    pub fn eval_k(&self, k: usize, xi: f64) -> Result<f64> {
        self.at_cell(k).k(xi)
    }

    /// Strict degree condition `deg(g) < 4 / (n - 2)`; vacuous for `n = 2`.
    pub fn check_sdc(&self, n: usize) -> Result<bool> {
        check_sdc(self.degree(), n)
    }
}

pub fn check_sdc(degree: f64, n: usize) -> Result<bool> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "spatial dimension must be >= 2, got {n}"
        )));
    }
    if n == 2 {
        return Ok(true);
    }
    Ok(degree < 4.0 / (n as f64 - 2.0))
}

/// Coefficient-derived weight fields.
#[derive(Debug, Clone)]
pub struct WeightSet {
    pub a: f64,
    /// Pointwise max of all coefficients.
    pub max_coeff: Field,
    /// Pointwise min of `a_0` and `a_N`.
    pub min_coeff: Field,
    pub w1: Field,
    pub w2: Field,
}

/// `W1 = a_N^a / (2 N M)` and `W2 = N M / (m a_N^(1-a))`.
pub fn build_weights(law: &ForchheimerLaw) -> Result<WeightSet> {
    if law.is_darcy() {
        return Err(Error::Domain(
            "weights need a law with at least two terms".into(),
        ));
    }
    let grid = *law.grid();
    let a = law.exponent_a();
    let n = law.n_terms() as f64;
    let max_coeff = Field::new(
        grid,
        (0..grid.len())
            .map(|k| {
                law.at_cell(k)
                    .coeffs
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect(),
    )?;
    let min_coeff = law.a0().zip_map(law.a_top(), f64::min)?;
    let an = law.a_top();
    let w1 = an.zip_map(&max_coeff, |an, m| an.powf(a) / (2.0 * n * m))?;
    let w2 = Field::new(
        grid,
        (0..grid.len())
            .map(|k| {
                let anv = an.values()[k];
                n * max_coeff.values()[k] / (min_coeff.values()[k] * anv.powf(1.0 - a))
            })
            .collect(),
    )?;
    Ok(WeightSet {
        a,
        max_coeff,
        min_coeff,
        w1,
        w2,
    })
}

/// Worst relative slack of one inequality over a sample set.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SlackRecord {
    pub min_slack: f64,
    pub worst_cell: usize,
    pub worst_xi: f64,
    pub samples: usize,
}

impl SlackRecord {
    fn new() -> Self {
        Self {
            min_slack: f64::INFINITY,
            worst_cell: 0,
            worst_xi: 0.0,
            samples: 0,
        }
    }

    fn push(&mut self, slack: f64, cell: usize, xi: f64) {
        self.samples += 1;
        if slack < self.min_slack || slack.is_nan() {
            self.min_slack = slack;
            self.worst_cell = cell;
            self.worst_xi = xi;
        }
    }

    fn merge(&mut self, other: &SlackRecord) {
        self.samples += other.samples;
        if other.min_slack < self.min_slack || other.min_slack.is_nan() {
            self.min_slack = other.min_slack;
            self.worst_cell = other.worst_cell;
            self.worst_xi = other.worst_xi;
        }
    }
}

/// Outcome of checking the mobility sandwich, the quadratic sandwich and the
/// logarithmic-derivative bound at every (cell, xi) sample.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConstitutiveReport {
    pub k_lower: SlackRecord,
    pub k_upper: SlackRecord,
    pub k_sq_lower: SlackRecord,
    pub k_sq_upper: SlackRecord,
    pub deriv_lower: SlackRecord,
    pub deriv_upper: SlackRecord,
    pub max_residual: f64,
    pub monotone: bool,
}

impl ConstitutiveReport {
    pub fn min_slack(&self) -> f64 {
        [
            &self.k_lower,
            &self.k_upper,
            &self.k_sq_lower,
            &self.k_sq_upper,
            &self.deriv_lower,
            &self.deriv_upper,
        ]
        .iter()
        .map(|r| r.min_slack)
        .fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, slack_tol: f64, residual_tol: f64) -> bool {
        self.min_slack() >= -slack_tol && self.max_residual <= residual_tol && self.monotone
    }
}

/// `xi K'(xi)` by Richardson-extrapolated central differences with relative step.
pub fn xi_dk_finite_difference(law: &PointLaw<'_>, xi: f64) -> Result<f64> {
    if xi == 0.0 {
        return Ok(0.0);
    }
    let h = 1e-3 * xi;
    let central = |h: f64| -> Result<f64> { Ok((law.k(xi + h)? - law.k(xi - h)?) / (2.0 * h)) };
    let d1 = central(h)?;
    let d2 = central(0.5 * h)?;
    Ok(xi * (4.0 * d2 - d1) / 3.0)
}

/// Checks the constitutive inequalities at the given cells and `xi` samples.
/// Slacks are relative to the larger side, so `-1e-9` means a violation of one
/// part in a billion.
pub fn verify_constitutive_bounds(
    law: &ForchheimerLaw,
    weights: &WeightSet,
    cells: &[usize],
    xi_samples: &[f64],
) -> Result<ConstitutiveReport> {
    if let Some(x) = xi_samples.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Domain(format!("xi sample {x} is negative")));
    }
    let a = weights.a;
    let mut rep = ConstitutiveReport {
        k_lower: SlackRecord::new(),
        k_upper: SlackRecord::new(),
        k_sq_lower: SlackRecord::new(),
        k_sq_upper: SlackRecord::new(),
        deriv_lower: SlackRecord::new(),
        deriv_upper: SlackRecord::new(),
        max_residual: 0.0,
        monotone: true,
    };
    let mut sorted = xi_samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &cell in cells {
        let pl = law.at_cell(cell);
        let w1 = weights.w1.values()[cell];
        let w2 = weights.w2.values()[cell];
        let an = pl.a_top();
        let mut prev: Option<(f64, f64, f64)> = None;
        for &xi in &sorted {
            let s = pl.solve_s(xi)?;
            let g = pl.g_unchecked(s);
            let kv = 1.0 / g;
            rep.max_residual = rep.max_residual.max((s * g - xi).abs() / (1.0 + xi));
            if let Some((pxi, ps, pk)) = prev {
                if xi > pxi && !(s > ps && kv <= pk) {
                    rep.monotone = false;
                }
            }
            prev = Some((xi, s, kv));

            let lower = 2.0 * w1 / (xi.powf(a) + an.powf(a));
            rep.k_lower.push((kv - lower) / kv.max(lower), cell, xi);
            if xi > 0.0 {
                let upper = w2 / xi.powf(a);
                rep.k_upper.push((upper - kv) / kv.max(upper), cell, xi);
            }

            let ksq = kv * xi * xi;
            let lo_sq = w1 * xi.powf(2.0 - a) - 0.5 * an;
            let scale = ksq.max(lo_sq.abs()).max(0.5 * an);
            rep.k_sq_lower.push((ksq - lo_sq) / scale, cell, xi);
            if xi > 0.0 {
                let hi_sq = w2 * xi.powf(2.0 - a);
                rep.k_sq_upper
                    .push((hi_sq - ksq) / hi_sq.max(ksq), cell, xi);
            }

            let d = xi_dk_finite_difference(&pl, xi)?;
            rep.deriv_lower.push((d + a * kv) / kv, cell, xi);
            rep.deriv_upper.push(-d / kv, cell, xi);
        }
    }
    Ok(rep)
}

/// Runs [`verify_constitutive_bounds`] over every cell, in parallel over rows.
pub fn verify_constitutive_field(
    law: &ForchheimerLaw,
    xi_samples: &[f64],
) -> Result<ConstitutiveReport> {
    use rayon::prelude::*;
    let weights = build_weights(law)?;
    let grid = *law.grid();
    let rows: Vec<ConstitutiveReport> = (0..grid.ny)
        .into_par_iter()
        .map(|j| {
            let cells: Vec<usize> = (0..grid.nx).map(|i| grid.idx(i, j)).collect();
            verify_constitutive_bounds(law, &weights, &cells, xi_samples)
        })
        .collect::<Result<_>>()?;
    let mut it = rows.into_iter();
    let mut acc = it.next().expect("grid has rows");
    for r in it {
        acc.k_lower.merge(&r.k_lower);
        acc.k_upper.merge(&r.k_upper);
        acc.k_sq_lower.merge(&r.k_sq_lower);
        acc.k_sq_upper.merge(&r.k_sq_upper);
        acc.deriv_lower.merge(&r.deriv_lower);
        acc.deriv_upper.merge(&r.deriv_upper);
        acc.max_residual = acc.max_residual.max(r.max_residual);
        acc.monotone &= r.monotone;
    }
    Ok(acc)
}

/// Zero followed by `count - 1` log-spaced values in `[lo, hi]`.
pub fn xi_samples_with_zero(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let m = count.saturating_sub(1);
    let (l0, l1) = (lo.ln(), hi.ln());
    for i in 0..m {
        let f = if m == 1 {
            0.0
        } else {
            i as f64 / (m - 1) as f64
        };
        out.push((l0 + f * (l1 - l0)).exp());
    }
    out
}
