//! Weighted Poincaré–Sobolev constants, the parabolic interpolation
//! inequalities built on them, the fast geometric recurrence and the
//! large-time decay lemma, all as numerical checks on grid data.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constitutive::{ForchheimerLaw, WeightSet};
use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, trapezoid, BoundaryValues, Field, Grid2D, SpaceTimeField};
use crate::weighted_norms::{
    ess_sup_time, gradient_magnitude, norm_lp, norm_lp_space, norm_lp_spacetime,
    weighted_power_integral, Weight,
};

const ADMISSIBILITY_LIMIT: f64 = 1e308;

/// `n q / (n - q)`, capped (and used as the value for `q >= n`).
pub fn sobolev_conjugate(q: f64, n: usize, cap: f64) -> f64 {
    let n = n as f64;
    if q >= n {
        cap
    } else {
        (n * q / (n - q)).min(cap)
    }
}

pub const DEFAULT_CONJUGATE_CAP: f64 = 1e3;

/// Exponents and weights of a two-weight Poincaré–Sobolev inequality
/// `||u||_{L^r_g1} <= c0 ||grad u||_{L^q_g2}` obtained from the unweighted
/// inequality with exponent `q0` and constant `c`.
#[derive(Debug, Clone)]
pub struct PSConfig {
    pub r: f64,
    pub q: f64,
    pub q0: f64,
    pub n: usize,
    pub gamma1: Field,
    pub gamma2: Field,
    /// Unweighted Sobolev constant for `q0` on the domain.
    pub c: f64,
}

impl PSConfig {
    pub fn new(
        r: f64,
        q: f64,
        q0: f64,
        n: usize,
        gamma1: Field,
        gamma2: Field,
        c: f64,
    ) -> Result<Self> {
        if !(r > 2.0) {
            return Err(Error::validation(
                "exponents.r",
                format!("need r > 2, got {r}"),
            ));
        }
        if !(q >= 1.0 && q < r) {
            return Err(Error::validation(
                "exponents.q",
                format!("need 1 <= q < r, got q = {q}"),
            ));
        }
        if !(q0 >= 1.0 && q0 < q && q0 < n as f64) {
            return Err(Error::validation(
                "exponents.q0",
                format!("need 1 <= q0 < min(q, n), got q0 = {q0}"),
            ));
        }
        let q0s = sobolev_conjugate(q0, n, DEFAULT_CONJUGATE_CAP);
        if !(r < q0s) {
            return Err(Error::validation(
                "exponents.q0",
                format!("need r < q0* = {q0s}, got r = {r}"),
            ));
        }
        if gamma1.grid() != gamma2.grid() {
            return Err(Error::validation("weights", "weights on different grids"));
        }
        if gamma1.min() <= 0.0 || gamma2.min() <= 0.0 {
            return Err(Error::validation("weights", "weights must be positive"));
        }
        if !(c > 0.0) {
            return Err(Error::validation(
                "exponents.c",
                "Sobolev constant must be positive",
            ));
        }
        Ok(Self {
            r,
            q,
            q0,
            n,
            gamma1,
            gamma2,
            c,
        })
    }

    pub fn q0_star(&self) -> f64 {
        sobolev_conjugate(self.q0, self.n, DEFAULT_CONJUGATE_CAP)
    }
}

/// Default `(r, q0)` for gradient exponent `q = 2 - a`: `r` is the midpoint of
/// `(2, q*)` and `q0` the midpoint of `(max(1, n r / (n + r)), q)`, which puts
/// `q0*` strictly between `r` and `q*`.
pub fn default_sobolev_exponents(a: f64, n: usize) -> Result<(f64, f64)> {
    let q = 2.0 - a;
    let qs = sobolev_conjugate(q, n, DEFAULT_CONJUGATE_CAP);
    if !(qs > 2.0) {
        return Err(Error::Domain(format!(
            "(2-a)* = {qs} leaves no room for r > 2"
        )));
    }
    let r = 0.5 * (2.0 + qs);
    let nf = n as f64;
    let lo = (nf * r / (nf + r)).max(1.0);
    if !(lo < q) {
        return Err(Error::Domain(format!("no admissible q0 in ({lo}, {q})")));
    }
    Ok((r, 0.5 * (lo + q)))
}

fn admissible_integral(w: &Field, power: f64, what: &str) -> Result<f64> {
    let terms: Vec<f64> = w.values().iter().map(|v| v.powf(power)).collect();
    if terms
        .iter()
        .any(|t| !t.is_finite() || *t > ADMISSIBILITY_LIMIT)
    {
        return Err(Error::Admissibility(format!("{what}: integrand overflows")));
    }
    let v = pairwise_sum(&terms) * w.grid().cell_area();
    if !v.is_finite() || v > ADMISSIBILITY_LIMIT {
        return Err(Error::Admissibility(format!("{what}: integral {v}")));
    }
    Ok(v)
}

/// `c0 = c (int g2^{-q0/(q-q0)})^{(q-q0)/(q q0)} (int g1^{q0*/(q0*-r)})^{(q0*-r)/(q0* r)}`.
pub fn estimate_c0_formula(cfg: &PSConfig) -> Result<f64> {
    let (q, q0, r) = (cfg.q, cfg.q0, cfg.r);
    let qs = cfg.q0_star();
    let i2 = admissible_integral(&cfg.gamma2, -q0 / (q - q0), "gamma2 integral")?;
    let i1 = admissible_integral(&cfg.gamma1, qs / (qs - r), "gamma1 integral")?;
    let c0 = cfg.c * i2.powf((q - q0) / (q * q0)) * i1.powf((qs - r) / (qs * r));
    if !c0.is_finite() {
        return Err(Error::Admissibility(format!("c0 = {c0}")));
    }
    Ok(c0)
}

/// Smooth test function vanishing on the boundary of the grid's rectangle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TestFunction {
    /// `sin(k pi X) sin(l pi Y)` in domain-normalized coordinates.
    Sine {
        k: u32,
        l: u32,
    },
    /// `exp(1 - 1 / (1 - rho^2))` for `rho = |x - c| / radius < 1`.
    Bump {
        cx: f64,
        cy: f64,
        radius: f64,
    },
    Combination(Vec<(f64, TestFunction)>),
}

impl TestFunction {
    pub fn eval(&self, grid: &Grid2D, x: f64, y: f64) -> f64 {
        match self {
            TestFunction::Sine { k, l } => {
                let xn = (x - grid.x0) / grid.lx();
                let yn = (y - grid.y0) / grid.ly();
                (*k as f64 * std::f64::consts::PI * xn).sin()
                    * (*l as f64 * std::f64::consts::PI * yn).sin()
            }
            TestFunction::Bump { cx, cy, radius } => {
                let rho2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (radius * radius);
                if rho2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - rho2)).exp()
                } else {
                    0.0
                }
            }
            TestFunction::Combination(terms) => {
                terms.iter().map(|(w, f)| w * f.eval(grid, x, y)).sum()
            }
        }
    }

    pub fn sample(&self, grid: &Grid2D) -> Field {
        Field::from_fn(*grid, |x, y| self.eval(grid, x, y)).expect("test functions are finite")
    }
}

fn random_bump(grid: &Grid2D, rng: &mut ChaCha8Rng) -> TestFunction {
    let half = 0.5 * grid.lx().min(grid.ly());
    let radius = rng.gen_range(0.3 * half..0.9 * half);
    let cx = rng.gen_range(grid.x0 + radius..grid.x0 + grid.lx() - radius);
    let cy = rng.gen_range(grid.y0 + radius..grid.y0 + grid.ly() - radius);
    TestFunction::Bump { cx, cy, radius }
}

/// Sine modes up to order four, then random bumps and random combinations,
/// until `count` functions are produced.
pub fn test_corpus(grid: &Grid2D, count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    'modes: for k in 1..=4 {
        for l in 1..=4 {
            if out.len() == count / 2 {
                break 'modes;
            }
            out.push(TestFunction::Sine { k, l });
        }
    }
    while out.len() < count {
        if out.len() % 2 == 0 {
            out.push(random_bump(grid, &mut rng));
        } else {
            let m = rng.gen_range(2..=4);
            let terms = (0..m)
                .map(|_| {
                    let w = rng.gen_range(-1.0..1.0);
                    let f = if rng.gen_bool(0.5) {
                        TestFunction::Sine {
                            k: rng.gen_range(1..=4),
                            l: rng.gen_range(1..=4),
                        }
                    } else {
                        random_bump(grid, &mut rng)
                    };
                    (w, f)
                })
                .collect();
            out.push(TestFunction::Combination(terms));
        }
    }
    out
}

/// Cell-centered `|grad u|` for grid data that vanishes on the boundary.
pub fn vanishing_trace_gradient(u: &Field) -> Field {
    gradient_magnitude(u, Some(&BoundaryValues::zeros(u.grid())))
}

/// `||f||_{q*} / ||grad f||_q` for one function.
pub fn sobolev_quotient(f: &Field, q: f64, n: usize) -> Result<f64> {
    let qs = sobolev_conjugate(q, n, DEFAULT_CONJUGATE_CAP);
    let den = norm_lp(&vanishing_trace_gradient(f), q)?;
    if den == 0.0 {
        return Err(Error::Domain(
            "Sobolev quotient of a constant function".into(),
        ));
    }
    Ok(norm_lp(f, qs)? / den)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EmpiricalConstant {
    /// Largest quotient seen: a lower estimate of the best constant.
    pub lower_estimate: f64,
    pub worst_index: usize,
    pub trials: usize,
    pub q: f64,
    pub q_star: f64,
}

/// Lower estimate of the unweighted Sobolev constant for exponent `q` over
/// the seeded test corpus.
pub fn estimate_c_empirical(
    grid: &Grid2D,
    q: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalConstant> {
    if !(q >= 1.0) {
        return Err(Error::Domain(format!(
            "Sobolev exponent must be >= 1, got {q}"
        )));
    }
    let corpus = test_corpus(grid, trials, seed);
    let quotients: Vec<f64> = corpus
        .par_iter()
        .map(|f| sobolev_quotient(&f.sample(grid), q, n))
        .collect::<Result<_>>()?;
    let (worst_index, lower_estimate) =
        quotients
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
    Ok(EmpiricalConstant {
        lower_estimate,
        worst_index,
        trials,
        q,
        q_star: sobolev_conjugate(q, n, DEFAULT_CONJUGATE_CAP),
    })
}

/// `p = 2 + q (1 - 2/r)`.
pub fn interpolation_exponent(r: f64, q: f64) -> f64 {
    2.0 + q * (1.0 - 2.0 / r)
}

fn relative_margin(rhs: f64, lhs: f64) -> f64 {
    let s = rhs.abs().max(lhs.abs());
    if s == 0.0 {
        0.0
    } else {
        (rhs - lhs) / s
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InterpolationMargin {
    pub p: f64,
    pub lhs: f64,
    /// Product form `c0^{q/p} E^{1-q/p} D^{q/p}`.
    pub rhs_product: f64,
    /// Sum form `c0^{q/p} (E + D)`.
    pub rhs_sum: f64,
    pub margin_product: f64,
    pub margin_sum: f64,
}

fn gradient_series(u: &SpaceTimeField) -> Result<SpaceTimeField> {
    let slices = u.slices().iter().map(vanishing_trace_gradient).collect();
    SpaceTimeField::new(*u.grid(), u.times().to_vec(), slices)
}

/// Both sides of the parabolic interpolation inequality
/// `||u||_{L^p_g1(Q)} <= c0^{q/p} (sup_t ||u||_{L^2_g1})^{1-q/p} ||grad u||_{L^q_g2(Q)}^{q/p}`
/// and of its sum form. Margins are relative; negative means violated.
pub fn verify_parabolic_interpolation(
    u: &SpaceTimeField,
    gamma1: &Field,
    gamma2: &Field,
    r: f64,
    q: f64,
    c0: f64,
) -> Result<InterpolationMargin> {
    if !(r > 2.0 && r > q && q >= 1.0) {
        return Err(Error::Domain(format!(
            "need r > 2 and r > q >= 1, got r = {r}, q = {q}"
        )));
    }
    let p = interpolation_exponent(r, q);
    let lhs = norm_lp_spacetime(u, Weight::Space(gamma1), p)?;
    let e = ess_sup_time(u, |f| norm_lp_space(f, gamma1, 2.0))?;
    let grad = gradient_series(u)?;
    let d = norm_lp_spacetime(&grad, Weight::Space(gamma2), q)?;
    let beta = q / p;
    let rhs_product = c0.powf(beta) * e.powf(1.0 - beta) * d.powf(beta);
    let rhs_sum = c0.powf(beta) * (e + d);
    Ok(InterpolationMargin {
        p,
        lhs,
        rhs_product,
        rhs_sum,
        margin_product: relative_margin(rhs_product, lhs),
        margin_sum: relative_margin(rhs_sum, lhs),
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CorollaryMargin {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Both sides of the mobility-weighted interpolation inequality
/// `||u||_{L^{4/r'}_phi(Q)} <= c0^{r'/2} (int a_N + sup_t int_{supp u} W1 f^{2-a})^{a r'/(4(2-a))}
///  (sup_t ||u||_{L^2_phi} + (int int K(x, f) |grad u|^2)^{1/2})`,
/// where `c0` is the constant of `||u||_{L^r_phi} <= c0 ||grad u||_{L^{2-a}_{W1}}`.
pub fn verify_corollary_k(
    u: &SpaceTimeField,
    f: &SpaceTimeField,
    law: &ForchheimerLaw,
    weights: &WeightSet,
    phi: &Field,
    c0: f64,
    r: f64,
) -> Result<CorollaryMargin> {
    if !(r > 2.0) {
        return Err(Error::Domain(format!("need r > 2, got {r}")));
    }
    if f.times() != u.times() || f.grid() != u.grid() {
        return Err(Error::Domain("u and f sampled differently".into()));
    }
    if f.slices().iter().any(|s| s.min() < 0.0) {
        return Err(Error::Domain("f must be non-negative".into()));
    }
    let a = weights.a;
    let rp = r / (r - 1.0);
    let lhs = norm_lp_spacetime(u, Weight::Space(phi), 4.0 / rp)?;
    let b1 = law.a_top().integral();
    let grid = *u.grid();
    let mut sup_w1 = 0.0f64;
    let mut k_grad = Vec::with_capacity(u.len());
    for (us, fs) in u.slices().iter().zip(f.slices()) {
        let terms: Vec<f64> = us
            .values()
            .iter()
            .zip(fs.values())
            .zip(weights.w1.values())
            .map(|((&uv, &fv), &w)| if uv != 0.0 { w * fv.powf(2.0 - a) } else { 0.0 })
            .collect();
        sup_w1 = sup_w1.max(pairwise_sum(&terms) * grid.cell_area());
        let grad = vanishing_trace_gradient(us);
        let kg = (0..grid.len())
            .map(|k| Ok(law.eval_k(k, fs.values()[k])? * grad.values()[k].powi(2)))
            .collect::<Result<Vec<f64>>>()?;
        k_grad.push(pairwise_sum(&kg) * grid.cell_area());
    }
    let dissipation = trapezoid(u.times(), &k_grad).sqrt();
    let e = ess_sup_time(u, |s| norm_lp_space(s, phi, 2.0))?;
    let rhs =
        c0.powf(rp / 2.0) * (b1 + sup_w1).powf(a * rp / (4.0 * (2.0 - a))) * (e + dissipation);
    Ok(CorollaryMargin {
        lhs,
        rhs,
        margin: relative_margin(rhs, lhs),
    })
}

/// `||u||_{L^r_g1} / ||grad u||_{L^q_g2}` for one slice, the quantity `c0` must dominate.
pub fn weighted_sobolev_quotient(
    u: &Field,
    gamma1: &Field,
    gamma2: &Field,
    r: f64,
    q: f64,
) -> Result<f64> {
    let num = weighted_power_integral(u, gamma1, r)?.powf(1.0 / r);
    let den = weighted_power_integral(&vanishing_trace_gradient(u), gamma2, q)?.powf(1.0 / q);
    Ok(if num == 0.0 { 0.0 } else { num / den })
}

/// `Y_{i+1} = sum_k A_k B^i Y_i^{1 + mu_k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceSpec {
    pub a: Vec<f64>,
    pub mu: Vec<f64>,
    pub b: f64,
    pub y0: f64,
}

impl RecurrenceSpec {
    pub fn new(a: Vec<f64>, mu: Vec<f64>, b: f64, y0: f64) -> Result<Self> {
        if a.is_empty() || a.len() != mu.len() {
            return Err(Error::Domain("need matching non-empty A_k and mu_k".into()));
        }
        if a.iter().any(|v| !(*v > 0.0)) || mu.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Domain("A_k and mu_k must be positive".into()));
        }
        if !(b > 1.0) {
            return Err(Error::Domain(format!("need B > 1, got {b}")));
        }
        if !(y0 >= 0.0) {
            return Err(Error::Domain(format!("need Y0 >= 0, got {y0}")));
        }
        Ok(Self { a, mu, b, y0 })
    }

    pub fn mu_min(&self) -> f64 {
        self.mu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Random spec with `m` in 1..=4, `B` in [2, 16], `mu_k` in [0.2, 2], `A_k` in [0.1, 10].
    pub fn random(rng: &mut impl Rng) -> Self {
        let m = rng.gen_range(1..=4);
        let a = (0..m).map(|_| rng.gen_range(0.1..=10.0)).collect();
        let mu = (0..m).map(|_| rng.gen_range(0.2..=2.0)).collect();
        let b = rng.gen_range(2.0..=16.0);
        Self { a, mu, b, y0: 0.0 }
    }
}

/// `min_k (m^-1 A_k^-1 B^{-1/mu})^{1/mu_k}` with `mu = min_k mu_k`.
pub fn threshold(spec: &RecurrenceSpec) -> f64 {
    let m = spec.a.len() as f64;
    let mu = spec.mu_min();
    spec.a
        .iter()
        .zip(&spec.mu)
        .map(|(&ak, &muk)| (1.0 / (m * ak) * spec.b.powf(-1.0 / mu)).powf(1.0 / muk))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub values: Vec<f64>,
    pub diverged: bool,
}

/// Iterates the recurrence with equality for `steps` steps, stopping early
/// when the sequence overflows.
pub fn run_recurrence(spec: &RecurrenceSpec, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Domain("need at least one step".into()));
    }
    let mut values = Vec::with_capacity(steps + 1);
    values.push(spec.y0);
    let mut y = spec.y0;
    for i in 0..steps {
        let bi = spec.b.powi(i as i32);
        y = spec
            .a
            .iter()
            .zip(&spec.mu)
            .map(|(&ak, &muk)| ak * bi * y.powf(1.0 + muk))
            .sum();
        values.push(y);
        if !y.is_finite() || y > 1e300 {
            return Ok(Trajectory {
                values,
                diverged: true,
            });
        }
    }
    Ok(Trajectory {
        values,
        diverged: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCheck {
    pub holds: bool,
    /// Detected start of the large-time regime.
    pub t_start: f64,
    /// Worst `f(t1) - f(t2) - (t2 - t1)(beta + 1)` over checked pairs (<= 0 when it holds).
    pub worst_excess: f64,
    pub worst_pair: Option<(f64, f64)>,
}

/// Checks `f(t1) <= f(t2) + (t2 - t1)(beta + 1)` for all sampled
/// `t2 > t1 >= T`, where `T` is the first sample after which every
/// difference quotient has negative part at most `beta + 1`.
pub fn check_decay_lemma(times: &[f64], f: &[f64], beta: f64) -> Result<DecayCheck> {
    if times.len() != f.len() || times.is_empty() {
        return Err(Error::Domain("need matching, non-empty samples".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("times must increase".into()));
    }
    let slope_cap = beta + 1.0;
    let mut start = 0;
    for n in 0..times.len() - 1 {
        let neg = (-(f[n + 1] - f[n]) / (times[n + 1] - times[n])).max(0.0);
        if neg > slope_cap {
            start = n + 1;
        }
    }
    let h = |n: usize| f[n] + slope_cap * times[n];
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_pair = None;
    let mut best_prev: Option<usize> = None;
    for n in start..times.len() {
        if let Some(m) = best_prev {
            let excess = h(m) - h(n);
            if excess > worst_excess {
                worst_excess = excess;
                worst_pair = Some((times[m], times[n]));
            }
        }
        if best_prev.is_none_or(|m| h(n) > h(m)) {
            best_prev = Some(n);
        }
    }
    let scale = f[start..].iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(DecayCheck {
        holds: worst_pair.is_none() || worst_excess <= 1e-12 * scale,
        t_start: times[start],
        worst_excess: if worst_pair.is_none() {
            0.0
        } else {
            worst_excess
        },
        worst_pair,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid2D {
        Grid2D::unit_square(n).unwrap()
    }

    fn cfg(g1: Field, g2: Field) -> PSConfig {
        PSConfig::new(4.0, 1.5, 17.0 / 12.0, 2, g1, g2, 1.0).unwrap()
    }

    #[test]
    fn c0_for_unit_weights_collapses_to_volumes() {
        let g = Grid2D::new(8, 8, 0.25, 0.25, 0.0, 0.0).unwrap();
        let one = Field::constant(g, 1.0).unwrap();
        let c = cfg(one.clone(), one);
        let (q, q0, r, qs) = (c.q, c.q0, c.r, c.q0_star());
        let vol: f64 = 4.0;
        let expect = vol.powf((q - q0) / (q * q0)) * vol.powf((qs - r) / (qs * r));
        assert!((estimate_c0_formula(&c).unwrap() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn doubling_gamma2_scales_c0() {
        let g = unit(8);
        let g1 = Field::from_fn(g, |x, y| 1.0 + x * y).unwrap();
        let g2 = Field::from_fn(g, |x, _| 0.5 + x).unwrap();
        let base = estimate_c0_formula(&cfg(g1.clone(), g2.clone())).unwrap();
        let doubled = estimate_c0_formula(&cfg(g1, g2.map(|v| 2.0 * v).unwrap())).unwrap();
        assert!((doubled / base - 2f64.powf(-1.0 / 1.5)).abs() < 1e-12);
    }

    #[test]
    fn c0_matches_direct_quadrature_for_constant_w1() {
        // phi = 1, W1 = 1/2, q = 2 - a with a = 1/2
        let g = unit(16);
        let phi = Field::constant(g, 1.0).unwrap();
        let w1 = Field::constant(g, 0.5).unwrap();
        let (r, q0) = default_sobolev_exponents(0.5, 2).unwrap();
        let c = PSConfig::new(r, 1.5, q0, 2, phi, w1, 1.0).unwrap();
        let expect = 0.5f64.powf(-q0 / (1.5 - q0)).powf((1.5 - q0) / (1.5 * q0));
        assert!((estimate_c0_formula(&c).unwrap() - expect).abs() < 1e-12 * expect);
        assert!((expect - 2f64.powf(1.0 / 1.5)).abs() < 1e-12);
    }

    #[test]
    fn admissibility_failure_is_reported() {
        let g = unit(4);
        let one = Field::constant(g, 1.0).unwrap();
        let tiny = Field::constant(g, 1e-300).unwrap();
        assert!(matches!(
            estimate_c0_formula(&cfg(one, tiny)),
            Err(Error::Admissibility(_))
        ));
    }

    #[test]
    fn default_exponents_for_half() {
        let (r, q0) = default_sobolev_exponents(0.5, 2).unwrap();
        assert!((r - 4.0).abs() < 1e-12);
        assert!((q0 - 0.5 * (4.0 / 3.0 + 1.5)).abs() < 1e-12);
        let qs = sobolev_conjugate(q0, 2, DEFAULT_CONJUGATE_CAP);
        assert!(r < qs && qs < 6.0);
    }

    #[test]
    fn config_rejects_bad_exponents() {
        let g = unit(4);
        let one = Field::constant(g, 1.0).unwrap();
        assert!(PSConfig::new(2.0, 1.5, 1.2, 2, one.clone(), one.clone(), 1.0).is_err());
        assert!(PSConfig::new(4.0, 1.5, 1.6, 2, one.clone(), one.clone(), 1.0).is_err());
        // q0* = 2 * 1.1 / 0.9 < 4
        assert!(PSConfig::new(4.0, 1.5, 1.1, 2, one.clone(), one, 1.0).is_err());
    }

    #[test]
    fn sobolev_quotient_is_scale_invariant() {
        let g = unit(32);
        let f = TestFunction::Sine { k: 1, l: 1 }.sample(&g);
        let q1 = sobolev_quotient(&f, 1.5, 2).unwrap();
        let q2 = sobolev_quotient(&f.map(|v| 2.0 * v).unwrap(), 1.5, 2).unwrap();
        assert!(q1.is_finite() && q1 > 0.0);
        assert!((q1 - q2).abs() < 1e-12 * q1);
        assert!(sobolev_quotient(&Field::zeros(g), 1.5, 2).is_err());
    }

    #[test]
    fn corpus_functions_vanish_on_boundary() {
        let g = unit(16);
        for f in test_corpus(&g, 20, 5) {
            for s in [0.0, 0.3, 1.0] {
                assert!(f.eval(&g, 0.0, s).abs() < 1e-12);
                assert!(f.eval(&g, 1.0, s).abs() < 1e-12);
                assert!(f.eval(&g, s, 0.0).abs() < 1e-12);
                assert!(f.eval(&g, s, 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_field_gives_zero_margins() {
        let g = unit(8);
        let one = Field::constant(g, 1.0).unwrap();
        let u = SpaceTimeField::from_fn(g, vec![0.0, 0.5, 1.0], |_, _, _| 0.0).unwrap();
        let m = verify_parabolic_interpolation(&u, &one, &one, 4.0, 1.5, 1.0).unwrap();
        assert_eq!((m.lhs, m.margin_product, m.margin_sum), (0.0, 0.0, 0.0));
    }

    #[test]
    fn interpolation_is_homogeneous() {
        let g = unit(16);
        let one = Field::constant(g, 1.0).unwrap();
        let times: Vec<f64> = (0..8).map(|n| n as f64 / 7.0).collect();
        let f = TestFunction::Sine { k: 1, l: 2 };
        let u = SpaceTimeField::from_fn(g, times, |x, y, t| (1.0 + t) * f.eval(&g, x, y)).unwrap();
        let a = verify_parabolic_interpolation(&u, &one, &one, 4.0, 1.5, 1.0).unwrap();
        let b =
            verify_parabolic_interpolation(&u.map(|v| 2.0 * v).unwrap(), &one, &one, 4.0, 1.5, 1.0)
                .unwrap();
        assert!((b.lhs / a.lhs - 2.0).abs() < 1e-12);
        assert!((b.rhs_product / a.rhs_product - 2.0).abs() < 1e-12);
        assert!((b.rhs_sum / a.rhs_sum - 2.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_exponent_lies_between_two_and_r() {
        for (r, q) in [(4.0, 1.5), (3.0, 1.0), (10.0, 9.0)] {
            let p = interpolation_exponent(r, q);
            assert!(2.0 < p && p < r);
        }
    }

    #[test]
    fn threshold_examples() {
        let s = RecurrenceSpec::new(vec![1.0], vec![1.0], 2.0, 0.0).unwrap();
        assert!((threshold(&s) - 0.5).abs() < 1e-15);
        let s = RecurrenceSpec::new(vec![1.0, 1.0], vec![1.0, 2.0], 4.0, 0.0).unwrap();
        assert!((threshold(&s) - 0.125).abs() < 1e-15);
        let s = RecurrenceSpec::new(vec![1e12], vec![1.0], 2.0, 0.0).unwrap();
        assert!(threshold(&s) < 1e-12);
    }

    #[test]
    fn recurrence_examples() {
        let s = RecurrenceSpec::new(vec![1.0], vec![1.0], 2.0, 0.5).unwrap();
        let t = run_recurrence(&s, 20).unwrap();
        for (i, y) in t.values.iter().enumerate() {
            assert!((y - 0.5f64.powi(i as i32 + 1)).abs() <= 1e-12 * 0.5f64.powi(i as i32 + 1));
        }
        let s = RecurrenceSpec::new(vec![1.0], vec![1.0], 2.0, 0.0).unwrap();
        assert!(run_recurrence(&s, 10)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == 0.0));
        let s = RecurrenceSpec::new(vec![1.0], vec![1.0], 2.0, 2.0).unwrap();
        let t = run_recurrence(&s, 20).unwrap();
        assert!(t.diverged);
    }

    #[test]
    fn decay_lemma_examples() {
        let times: Vec<f64> = (0..200).map(|n| n as f64 * 0.05).collect();
        let c = vec![3.0; times.len()];
        assert!(check_decay_lemma(&times, &c, 0.0).unwrap().holds);
        let e: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        assert!(check_decay_lemma(&times, &e, 0.0).unwrap().holds);
        let lin = times.clone();
        assert!(check_decay_lemma(&times, &lin, 0.0).unwrap().holds);
        // steep early drop is excluded by the detected start
        let steep: Vec<f64> = times.iter().map(|t| 50.0 * (-5.0 * t).exp()).collect();
        let d = check_decay_lemma(&times, &steep, 0.0).unwrap();
        assert!(d.holds && d.t_start > 0.0);
    }
}
