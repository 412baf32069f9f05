use rayon::prelude::*;
use serde::Serialize;

use super::series::TimeSeries;
use super::ExponentPack;
use crate::constitutive::WeightSet;
use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Field};
use crate::solver::BoundaryData;

/// Boundary-data functionals of a scenario, sampled in time.
#[derive(Debug, Clone, Serialize)]
pub struct DataFunctionals {
    /// `int a_N`.
    pub b1: f64,
    pub b_star: f64,
    /// `B* + ||grad Psi||^2_{L^2_{1/a0}} + ||grad Psi||^{2-a}_{L^{2-a}_{W1}} + ||Psi_t||^{(2-a)/(1-a)}_{L^2_phi}`.
    pub g: TimeSeries,
    /// `||grad Psi_t||^2_{L^2_{1/a0}}`.
    pub g1: TimeSeries,
    /// Running maximum of `g`, non-decreasing and `>= g` at every sample.
    pub majorant: TimeSeries,
    /// Length of the trailing window standing in for `t -> infinity`.
    pub window: f64,
    /// Max of `g` over the trailing window.
    pub limit_a: f64,
    /// Max of the negative part of `g'` over the trailing window.
    pub limit_b: f64,
    /// First time `>= 1` after which the tail max of `[g']^-` is within 10% of `limit_b`.
    pub large_time_start: f64,
}

impl DataFunctionals {
    pub fn window_start(&self) -> f64 {
        (self.g.end() - self.window).max(self.g.start())
    }
}

/// Per-time spatial integrals of the boundary data used by the bounds.
#[derive(Debug, Clone)]
pub(crate) struct DataSeries {
    pub functionals: DataFunctionals,
    /// `int (W1 |grad Psi|^{2-a} + |grad Psi|^2 / a0)^{r1'} phi^{1-r1'}`.
    pub n1_grad: TimeSeries,
    /// `int |Psi_t|^{2 r1'} phi`.
    pub n1_rate: TimeSeries,
    /// `int (|grad Psi_t| / sqrt(a0))^{2 r2} phi`.
    pub n2_grad: TimeSeries,
    /// `int |Psi_tt|^{2 r2} phi`.
    pub n2_tt: TimeSeries,
}

struct Sample {
    g: f64,
    g1: f64,
    n1_grad: f64,
    n1_rate: f64,
    n2_grad: f64,
    n2_tt: f64,
}

fn sample_at(
    boundary: &BoundaryData,
    weights: &WeightSet,
    a0: &Field,
    phi: &Field,
    pack: &ExponentPack,
    b_star: f64,
    t: f64,
) -> Sample {
    let grid = *phi.grid();
    let a = weights.a;
    let q = 2.0 - a;
    let r1c = pack.r1_conj;
    let r2 = pack.r2;
    let cells: Vec<[f64; 8]> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (x, y) = grid.cell_center(k);
            let [gx, gy] = boundary.gradient(x, y, t);
            let pt = boundary.time_derivative(x, y, t);
            let [gxt, gyt] = boundary.gradient_time_derivative(x, y, t);
            let ptt = boundary.second_time_derivative(x, y, t);
            let a0 = a0.values()[k];
            let f = phi.values()[k];
            let w1 = weights.w1.values()[k];
            let grad = gx.hypot(gy);
            let grad_t = gxt.hypot(gyt);
            let darcy_part = grad * grad / a0;
            let w1_part = if grad == 0.0 { 0.0 } else { w1 * grad.powf(q) };
            let n1g = w1_part + darcy_part;
            [
                darcy_part,
                w1_part,
                f * pt * pt,
                grad_t * grad_t / a0,
                if n1g == 0.0 {
                    0.0
                } else {
                    n1g.powf(r1c) * f.powf(1.0 - r1c)
                },
                if pt == 0.0 {
                    0.0
                } else {
                    pt.abs().powf(2.0 * r1c) * f
                },
                if grad_t == 0.0 {
                    0.0
                } else {
                    (grad_t / a0.sqrt()).powf(2.0 * r2) * f
                },
                if ptt == 0.0 {
                    0.0
                } else {
                    ptt.abs().powf(2.0 * r2) * f
                },
            ]
        })
        .collect();
    let da = grid.cell_area();
    let col = |i: usize| pairwise_sum(&cells.iter().map(|c| c[i]).collect::<Vec<_>>()) * da;
    let rate_l2sq = col(2);
    let rate_term = if rate_l2sq == 0.0 {
        0.0
    } else {
        rate_l2sq.powf(q / (2.0 * (1.0 - a)))
    };
    Sample {
        g: b_star + col(0) + col(1) + rate_term,
        g1: col(3),
        n1_grad: col(4),
        n1_rate: col(5),
        n2_grad: col(6),
        n2_tt: col(7),
    }
}

/// Samples every data functional at `times` and derives the majorant and
/// the trailing-window surrogates of the limits at infinity.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_data(
    boundary: &BoundaryData,
    weights: &WeightSet,
    a0: &Field,
    a_top: &Field,
    phi: &Field,
    pack: &ExponentPack,
    times: Vec<f64>,
    window: f64,
) -> Result<DataSeries> {
    if !(window > 0.0) {
        return Err(Error::validation(
            "verify.window",
            "window must be positive",
        ));
    }
    let b1 = a_top.integral();
    let b_star = b1.max(1.0);
    let samples: Vec<Sample> = times
        .iter()
        .map(|&t| sample_at(boundary, weights, a0, phi, pack, b_star, t))
        .collect();
    let series =
        |f: fn(&Sample) -> f64| TimeSeries::new(times.clone(), samples.iter().map(f).collect());
    let g = series(|s| s.g)?;
    if g.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "boundary data functional is not finite".into(),
        ));
    }
    let mut running = f64::NEG_INFINITY;
    let majorant = TimeSeries::new(
        times.clone(),
        g.values
            .iter()
            .map(|&v| {
                running = running.max(v);
                running
            })
            .collect(),
    )?;

    let t_end = g.end();
    let w_start = (t_end - window).max(g.start());
    let limit_a = g.max_over(w_start, t_end);
    // [g']^- on each sampling interval, then its tail maxima.
    let slopes: Vec<f64> = times
        .windows(2)
        .zip(g.values.windows(2))
        .map(|(t, v)| (-(v[1] - v[0]) / (t[1] - t[0])).max(0.0))
        .collect();
    let limit_b = slopes
        .iter()
        .zip(times.windows(2))
        .filter(|(_, t)| 0.5 * (t[0] + t[1]) >= w_start)
        .map(|(s, _)| *s)
        .fold(0.0, f64::max);
    let mut tail = vec![0.0f64; slopes.len() + 1];
    for k in (0..slopes.len()).rev() {
        tail[k] = tail[k + 1].max(slopes[k]);
    }
    let settle = 1.1 * limit_b + 1e-12 * (1.0 + limit_b);
    let large_time_start = times
        .iter()
        .zip(&tail)
        .find(|(_, &b)| b <= settle)
        .map_or(t_end, |(&t, _)| t)
        .max(1.0);

    Ok(DataSeries {
        functionals: DataFunctionals {
            b1,
            b_star,
            g1: series(|s| s.g1)?,
            g,
            majorant,
            window,
            limit_a,
            limit_b,
            large_time_start,
        },
        n1_grad: series(|s| s.n1_grad)?,
        n1_rate: series(|s| s.n1_rate)?,
        n2_grad: series(|s| s.n2_grad)?,
        n2_tt: series(|s| s.n2_tt)?,
    })
}
