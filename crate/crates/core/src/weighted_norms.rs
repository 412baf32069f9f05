//! Weighted Lebesgue norms on the grid and on space-time cylinders, plus the
//! discrete gradient shared by the norms and the solver.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, trapezoid, BoundaryValues, Field, Grid2D, SpaceTimeField};

/// Weight for a space-time norm.
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    /// Constant in time.
    Space(&'a Field),
    SpaceTime(&'a SpaceTimeField),
}

fn check_weight(w: &Field) -> Result<()> {
    if let Some(k) = w.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!(
            "weight is not positive at cell {k} ({})",
            w.values()[k]
        )));
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!(
            "norm exponent must be in [1, inf], got {p}"
        )));
    }
    Ok(())
}

/// `sum |u|^p w dA`, the p-th power of the weighted norm.
pub fn weighted_power_integral(u: &Field, w: &Field, p: f64) -> Result<f64> {
    if u.grid() != w.grid() {
        return Err(Error::Domain(
            "field and weight live on different grids".into(),
        ));
    }
    check_weight(w)?;
    let terms: Vec<f64> = u
        .values()
        .iter()
        .zip(w.values())
        .map(|(&u, &w)| pow_abs(u, p) * w)
        .collect();
    Ok(pairwise_sum(&terms) * u.grid().cell_area())
}

#[inline]
pub(crate) fn pow_abs(u: f64, p: f64) -> f64 {
    let a = u.abs();
    if p == 2.0 {
        a * a
    } else if p == 1.0 {
        a
    } else if a == 0.0 {
        0.0
    } else {
        a.powf(p)
    }
}

/// Midpoint-rule `L^p_w(U)` norm; `p = inf` gives the max over cells.
pub fn norm_lp_space(u: &Field, w: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        check_weight(w)?;
        return Ok(u.max_abs());
    }
    Ok(weighted_power_integral(u, w, p)?.powf(1.0 / p))
}

/// Unweighted `L^p(U)` norm.
pub fn norm_lp(u: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(u.max_abs());
    }
    let terms: Vec<f64> = u.values().iter().map(|&v| pow_abs(v, p)).collect();
    Ok((pairwise_sum(&terms) * u.grid().cell_area()).powf(1.0 / p))
}

/// `int int |u|^p w dx dt` with the midpoint rule in space and trapezoid in time.
pub fn spacetime_power_integral(u: &SpaceTimeField, w: Weight<'_>, p: f64) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::Domain("space-time field has no samples".into()));
    }
    let per_time = (0..u.len())
        .map(|n| {
            let wn = match w {
                Weight::Space(f) => f,
                Weight::SpaceTime(f) => {
                    if f.times() != u.times() {
                        return Err(Error::Domain("weight samples at different times".into()));
                    }
                    f.slice(n)
                }
            };
            weighted_power_integral(u.slice(n), wn, p)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(u.times(), &per_time))
}

/// `L^p_w(Q_T)`; `p = inf` gives the max over all cells and samples.
pub fn norm_lp_spacetime(u: &SpaceTimeField, w: Weight<'_>, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        match w {
            Weight::Space(f) => check_weight(f)?,
            Weight::SpaceTime(f) => f.slices().iter().try_for_each(check_weight)?,
        }
        return Ok(u.max_abs());
    }
    Ok(spacetime_power_integral(u, w, p)?.powf(1.0 / p))
}

/// Max over the time samples of a spatial functional.
pub fn ess_sup_time(u: &SpaceTimeField, reduce: impl Fn(&Field) -> Result<f64>) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::Domain("ess sup over an empty time set".into()));
    }
    u.slices()
        .iter()
        .map(reduce)
        .try_fold(f64::NEG_INFINITY, |m, v| Ok(m.max(v?)))
}

/// Face-normal derivatives. `gx` lives on the `(nx + 1) x ny` vertical faces,
/// `gy` on the `nx x (ny + 1)` horizontal faces, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGradient {
    grid: Grid2D,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl FaceGradient {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Vertical face left of cell `(i, j)`; `i` runs to `nx`.
    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> f64 {
        self.gx[j * (self.grid.nx + 1) + i]
    }

    /// Horizontal face below cell `(i, j)`; `j` runs to `ny`.
    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> f64 {
        self.gy[j * self.grid.nx + i]
    }

    /// Cell-centered gradient: the mean of the two face derivatives along each axis.
    pub fn cell_components(&self) -> (Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let mut cx = vec![0.0; g.len()];
        let mut cy = vec![0.0; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                cx[k] = 0.5 * (self.x_face(i, j) + self.x_face(i + 1, j));
                cy[k] = 0.5 * (self.y_face(i, j) + self.y_face(i, j + 1));
            }
        }
        (cx, cy)
    }

    /// `|grad u|` at cell centers.
    pub fn cell_magnitude(&self) -> Field {
        let (cx, cy) = self.cell_components();
        let v = cx.iter().zip(&cy).map(|(a, b)| a.hypot(*b)).collect();
        Field::new(self.grid, v).expect("finite input gives finite gradient")
    }

    /// `|grad u|` on vertical faces: normal difference plus the transverse
    /// derivative averaged over the adjacent cells (a single cell at the boundary).
    pub fn x_face_magnitude(&self, cell_gy: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let mut out = vec![0.0; (g.nx + 1) * g.ny];
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let t = if i == 0 {
                    cell_gy[g.idx(0, j)]
                } else if i == g.nx {
                    cell_gy[g.idx(g.nx - 1, j)]
                } else {
                    0.5 * (cell_gy[g.idx(i - 1, j)] + cell_gy[g.idx(i, j)])
                };
                out[j * (g.nx + 1) + i] = self.x_face(i, j).hypot(t);
            }
        }
        out
    }

    /// `|grad u|` on horizontal faces, as [`Self::x_face_magnitude`].
    pub fn y_face_magnitude(&self, cell_gx: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let mut out = vec![0.0; g.nx * (g.ny + 1)];
        for j in 0..=g.ny {
            for i in 0..g.nx {
                let t = if j == 0 {
                    cell_gx[g.idx(i, 0)]
                } else if j == g.ny {
                    cell_gx[g.idx(i, g.ny - 1)]
                } else {
                    0.5 * (cell_gx[g.idx(i, j - 1)] + cell_gx[g.idx(i, j)])
                };
                out[j * g.nx + i] = self.y_face(i, j).hypot(t);
            }
        }
        out
    }
}

/// Face-normal differences of a cell-centered field.
///
/// Interior faces use the two adjacent cells. With Dirichlet data the
/// boundary faces use the half-cell difference to the boundary value;
/// without it they copy the nearest interior face.
pub fn gradient_field(u: &Field, bc: Option<&BoundaryValues>) -> FaceGradient {
    let g = *u.grid();
    let v = u.values();
    let (nx, ny) = (g.nx, g.ny);
    let mut gx = vec![0.0; (nx + 1) * ny];
    let mut gy = vec![0.0; nx * (ny + 1)];
    for j in 0..ny {
        let row = j * (nx + 1);
        for i in 1..nx {
            gx[row + i] = (v[g.idx(i, j)] - v[g.idx(i - 1, j)]) / g.dx;
        }
        match bc {
            Some(b) => {
                gx[row] = (v[g.idx(0, j)] - b.left[j]) / (0.5 * g.dx);
                gx[row + nx] = (b.right[j] - v[g.idx(nx - 1, j)]) / (0.5 * g.dx);
            }
            None => {
                gx[row] = gx[row + 1];
                gx[row + nx] = gx[row + nx - 1];
            }
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            gy[j * nx + i] = (v[g.idx(i, j)] - v[g.idx(i, j - 1)]) / g.dy;
        }
    }
    for i in 0..nx {
        match bc {
            Some(b) => {
                gy[i] = (v[g.idx(i, 0)] - b.bottom[i]) / (0.5 * g.dy);
                gy[ny * nx + i] = (b.top[i] - v[g.idx(i, ny - 1)]) / (0.5 * g.dy);
            }
            None => {
                gy[i] = gy[nx + i];
                gy[ny * nx + i] = gy[(ny - 1) * nx + i];
            }
        }
    }
    FaceGradient { grid: g, gx, gy }
}

/// Cell-centered `|grad u|`.
pub fn gradient_magnitude(u: &Field, bc: Option<&BoundaryValues>) -> Field {
    gradient_field(u, bc).cell_magnitude()
}

/// Worst slack of each scalar inequality over random samples; all must be `>= -tol`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ElementaryReport {
    pub subadditive_power: f64,
    pub convex_power: f64,
    pub three_power: f64,
    pub one_plus_power: f64,
    pub reverse_difference: f64,
    pub samples: usize,
}

impl ElementaryReport {
    pub fn min_slack(&self) -> f64 {
        [
            self.subadditive_power,
            self.convex_power,
            self.three_power,
            self.one_plus_power,
            self.reverse_difference,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

fn rel_slack(big: f64, small: f64) -> f64 {
    (big - small) / big.abs().max(small.abs()).max(1e-300)
}

/// Samples the scalar power inequalities used throughout the estimates:
/// `(x+y)^p <= x^p + y^p` for `p <= 1`, `(x+y)^p <= 2^(p-1)(x^p + y^p)` for
/// `p >= 1`, `x^b <= x^a + x^c` for `c >= b >= a >= 0`, `x^b <= 1 + x^c`
/// for `c >= b >= 0`, and `|x-y|^p >= 2^(1-p)|x|^p - |y|^p` for vectors.
pub fn check_elementary_inequalities<R: Rng>(rng: &mut R, samples: usize) -> ElementaryReport {
    let mut rep = ElementaryReport {
        subadditive_power: f64::INFINITY,
        convex_power: f64::INFINITY,
        three_power: f64::INFINITY,
        one_plus_power: f64::INFINITY,
        reverse_difference: f64::INFINITY,
        samples,
    };
    for _ in 0..samples {
        let x = 10f64.powf(rng.gen_range(-6.0..6.0));
        let y = 10f64.powf(rng.gen_range(-6.0..6.0));
        let p_small: f64 = rng.gen_range(0.01..=1.0);
        let lhs = (x + y).powf(p_small);
        rep.subadditive_power = rep
            .subadditive_power
            .min(rel_slack(x.powf(p_small) + y.powf(p_small), lhs));

        let p_big: f64 = rng.gen_range(1.0..8.0);
        let lhs = (x + y).powf(p_big);
        let rhs = 2f64.powf(p_big - 1.0) * (x.powf(p_big) + y.powf(p_big));
        rep.convex_power = rep.convex_power.min(rel_slack(rhs, lhs));

        let mut e: [f64; 3] = [
            rng.gen_range(0.0..4.0),
            rng.gen_range(0.0..4.0),
            rng.gen_range(0.0..4.0),
        ];
        e.sort_by(f64::total_cmp);
        let z: f64 = rng.gen_range(0.0..5.0);
        rep.three_power = rep
            .three_power
            .min(rel_slack(z.powf(e[0]) + z.powf(e[2]), z.powf(e[1])));
        rep.one_plus_power = rep
            .one_plus_power
            .min(rel_slack(1.0 + z.powf(e[2]), z.powf(e[1])));

        let dim = rng.gen_range(1..=3);
        let xv: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let yv: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let diff: Vec<f64> = xv.iter().zip(&yv).map(|(a, b)| a - b).collect();
        let lhs = norm(&diff).powf(p_big);
        let rhs = 2f64.powf(1.0 - p_big) * norm(&xv).powf(p_big) - norm(&yv).powf(p_big);
        let scale = lhs
            .max(norm(&xv).powf(p_big))
            .max(norm(&yv).powf(p_big))
            .max(1e-300);
        rep.reverse_difference = rep.reverse_difference.min((lhs - rhs) / scale);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn unit(n: usize) -> Grid2D {
        Grid2D::unit_square(n).unwrap()
    }

    #[test]
    fn space_norm_examples() {
        let g = unit(8);
        let one = Field::constant(g, 1.0).unwrap();
        let two = Field::constant(g, 2.0).unwrap();
        assert!((norm_lp_space(&one, &one, 2.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((norm_lp_space(&two, &one, 2.0).unwrap() - 2.0).abs() < 1e-14);
        let g = unit(64);
        let x = Field::from_fn(g, |x, _| x).unwrap();
        let one = Field::constant(g, 1.0).unwrap();
        let err = (norm_lp_space(&x, &one, 2.0).unwrap() - (1.0f64 / 3.0).sqrt()).abs();
        assert!(err < 1.0 / (64.0 * 64.0));
    }

    #[test]
    fn spacetime_norm_examples() {
        let g = unit(4);
        let times: Vec<f64> = (0..=200).map(|n| n as f64 / 200.0).collect();
        let one = Field::constant(g, 1.0).unwrap();
        let u = SpaceTimeField::from_fn(g, times.clone(), |_, _, _| 1.0).unwrap();
        assert!((norm_lp_spacetime(&u, Weight::Space(&one), 2.0).unwrap() - 1.0).abs() < 1e-14);
        let u = SpaceTimeField::from_fn(g, times.clone(), |_, _, t| t).unwrap();
        let v = norm_lp_spacetime(&u, Weight::Space(&one), 2.0).unwrap();
        assert!((v - (1.0f64 / 3.0).sqrt()).abs() < 1e-4);
        let u = SpaceTimeField::from_fn(g, times, |_, _, _| -3.0).unwrap();
        assert_eq!(
            norm_lp_spacetime(&u, Weight::Space(&one), f64::INFINITY).unwrap(),
            3.0
        );
    }

    #[test]
    fn nonpositive_weight_is_rejected() {
        let g = unit(4);
        let u = Field::constant(g, 1.0).unwrap();
        let w = Field::from_fn(g, |x, _| x - 0.5).unwrap();
        assert!(norm_lp_space(&u, &w, 2.0).is_err());
        assert!(norm_lp_space(&u, &w, f64::INFINITY).is_err());
        assert!(norm_lp_space(&u, &u, 0.5).is_err());
    }

    #[test]
    fn ess_sup_examples() {
        let g = unit(4);
        let one = Field::constant(g, 1.0).unwrap();
        let times: Vec<f64> = (0..=1000)
            .map(|n| std::f64::consts::PI * n as f64 / 1000.0)
            .collect();
        let u = SpaceTimeField::from_fn(g, times, |_, _, t| t.sin()).unwrap();
        let s = ess_sup_time(&u, |f| norm_lp_space(f, &one, 2.0)).unwrap();
        assert!((s - 1.0).abs() < 1e-5);
        let single = SpaceTimeField::from_fn(g, vec![0.3], |_, _, _| 2.0).unwrap();
        assert_eq!(ess_sup_time(&single, |f| Ok(f.max())).unwrap(), 2.0);
        let zero = SpaceTimeField::from_fn(g, vec![0.0, 1.0], |_, _, _| 0.0).unwrap();
        assert_eq!(
            ess_sup_time(&zero, |f| norm_lp_space(f, &one, 2.0)).unwrap(),
            0.0
        );
        let empty = SpaceTimeField::new(g, vec![], vec![]).unwrap();
        assert!(ess_sup_time(&empty, |f| Ok(f.max())).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = unit(10);
        let u = Field::from_fn(g, |x, _| x).unwrap();
        let grad = gradient_field(&u, None);
        for j in 0..10 {
            for i in 1..10 {
                assert!((grad.x_face(i, j) - 1.0).abs() < 1e-12);
            }
        }
        assert!(grad.gy.iter().all(|v| v.abs() < 1e-12));
        let c = Field::constant(g, 3.0).unwrap();
        let grad = gradient_field(&c, Some(&BoundaryValues::from_fn(&g, |_, _| 3.0)));
        assert!(grad.gx.iter().chain(&grad.gy).all(|v| *v == 0.0));
        let q = Field::from_fn(g, |x, _| x * x).unwrap();
        let grad = gradient_field(&q, None);
        assert!((grad.x_face(5, 3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_face_is_exact_for_linear_data() {
        let g = unit(8);
        let f = |x: f64, y: f64| 2.0 * x - 3.0 * y;
        let u = Field::from_fn(g, f).unwrap();
        let grad = gradient_field(&u, Some(&BoundaryValues::from_fn(&g, f)));
        assert!(grad.gx.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(grad.gy.iter().all(|v| (v + 3.0).abs() < 1e-12));
        let m = grad.cell_magnitude();
        assert!(m.values().iter().all(|v| (v - 13f64.sqrt()).abs() < 1e-12));
        let (cx, cy) = grad.cell_components();
        let fx = grad.x_face_magnitude(&cy);
        let fy = grad.y_face_magnitude(&cx);
        assert!(fx
            .iter()
            .chain(&fy)
            .all(|v| (v - 13f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn quadrature_is_second_order() {
        let exact = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let err = |n: usize| {
            let g = unit(n);
            let u = Field::from_fn(g, |x, y| {
                (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
            })
            .unwrap();
            (u.integral() - exact).abs()
        };
        let ratio = err(16) / err(32);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn elementary_inequalities_hold() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rep = check_elementary_inequalities(&mut rng, 5000);
        assert!(rep.min_slack() >= -1e-12, "{rep:?}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn field(g: Grid2D, vals: &[f64]) -> Field {
            Field::new(g, vals.to_vec()).unwrap()
        }

        proptest! {
            #[test]
            fn homogeneous(vals in prop::collection::vec(-10.0..10.0f64, 16), c in -5.0..5.0f64, p in prop::sample::select(vec![1.0, 2.0, 3.5, f64::INFINITY])) {
                let g = unit(4);
                let u = field(g, &vals);
                let w = Field::from_fn(g, |x, y| 0.5 + x + y).unwrap();
                let cu = u.map(|v| c * v).unwrap();
                let lhs = norm_lp_space(&cu, &w, p).unwrap();
                let rhs = c.abs() * norm_lp_space(&u, &w, p).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
            }

            #[test]
            fn triangle(a in prop::collection::vec(-10.0..10.0f64, 16), b in prop::collection::vec(-10.0..10.0f64, 16), p in prop::sample::select(vec![1.0, 2.0, 4.0])) {
                let g = unit(4);
                let (u, v) = (field(g, &a), field(g, &b));
                let w = Field::from_fn(g, |x, _| 1.0 + x).unwrap();
                let s = u.zip_map(&v, |x, y| x + y).unwrap();
                let lhs = norm_lp_space(&s, &w, p).unwrap();
                let rhs = norm_lp_space(&u, &w, p).unwrap() + norm_lp_space(&v, &w, p).unwrap();
                prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
            }

            #[test]
            fn monotone_in_weight(a in prop::collection::vec(-10.0..10.0f64, 16), w in prop::collection::vec(0.01..5.0f64, 16), bump in prop::collection::vec(0.0..5.0f64, 16), p in 1.0..6.0f64) {
                let g = unit(4);
                let u = field(g, &a);
                let w1 = field(g, &w);
                let w2 = w1.zip_map(&field(g, &bump), |x, y| x + y).unwrap();
                prop_assert!(norm_lp_space(&u, &w1, p).unwrap() <= norm_lp_space(&u, &w2, p).unwrap() * (1.0 + 1e-12));
            }
        }
    }
}
