use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::constitutive::Exponents;
use crate::expr::Expr;
use crate::grid::Grid2D;
use crate::solver::{run, BoundaryData, PicardOptions};

fn two_term(grid: Grid2D, a0: f64, a1: f64) -> ForchheimerLaw {
    ForchheimerLaw::new(
        vec![0.0, 1.0],
        vec![
            Field::constant(grid, a0).unwrap(),
            Field::constant(grid, a1).unwrap(),
        ],
    )
    .unwrap()
}

fn scenario(
    n: usize,
    psi: &str,
    initial: impl Fn(f64, f64) -> f64,
    t_end: f64,
    dt: f64,
) -> Scenario {
    let g = Grid2D::unit_square(n).unwrap();
    let boundary = BoundaryData::new(Expr::parse(psi).unwrap());
    Scenario {
        law: two_term(g, 1.0, 1.0),
        porosity: Field::constant(g, 1.0).unwrap(),
        initial: Field::from_fn(g, |x, y| initial(x, y) + boundary.value(x, y, 0.0)).unwrap(),
        boundary,
        t_end,
        dt,
        snapshot_every: 1,
        picard: PicardOptions::default(),
        source: None,
    }
}

fn pack() -> ExponentPack {
    ExponentPack::with_defaults(0.5, 4.0).unwrap()
}

#[test]
fn h_special_values() {
    let darcy = Exponents::new(&[0.0]).unwrap();
    let c = [1.0];
    assert_eq!(compute_h(&darcy.at(&c), 0.0).unwrap(), 0.0);
    assert!((compute_h(&darcy.at(&c), 3.0).unwrap() - 9.0).abs() < 1e-12);
    let lin = Exponents::new(&[0.0, 1.0]).unwrap();
    let c = [1.0, 1.0];
    // K(xi) = 2 / (1 + sqrt(1 + 4 xi)); the integral up to xi^2 = 4 is 7/3.
    assert!((compute_h(&lin.at(&c), 2.0).unwrap() - 7.0 / 3.0).abs() < 1e-12);
    assert!((compute_h_trapezoid(&lin.at(&c), 2.0).unwrap() - 7.0 / 3.0).abs() < 1e-8 * 7.0 / 3.0);
    assert!(compute_h(&lin.at(&c), -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn h_matches_quadrature_and_sandwich(
        a0 in 0.1f64..5.0, a1 in 0.0f64..5.0, a2 in 0.1f64..5.0, xi in 0.0f64..50.0,
    ) {
        let e = Exponents::new(&[0.0, 0.5, 1.7]).unwrap();
        let c = [a0, a1, a2];
        let law = e.at(&c);
        let h = compute_h(&law, xi).unwrap();
        let hq = compute_h_trapezoid(&law, xi).unwrap();
        prop_assert!((h - hq).abs() <= 1e-7 * h.max(1e-300), "{h} vs {hq}");
        let k = law.k(xi).unwrap();
        prop_assert!(k * xi * xi <= h * (1.0 + 1e-12));
        prop_assert!(h <= xi * xi / a0 * (1.0 + 1e-12));
    }
}

#[test]
fn zero_data_gives_unit_functionals_and_zero_lhs() {
    let sc = scenario(8, "0", |_, _| 0.0, 0.5, 0.05);
    let out = run(&sc).unwrap();
    let ctx = BoundsContext::new(&sc, &out, pack(), 1.0, DEFAULT_WINDOW).unwrap();
    let d = ctx.data();
    assert!(d.g.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert!(d.g1.values.iter().all(|v| *v == 0.0));
    assert!((ctx.n1(0.0, 0.5) - 1.0).abs() < 1e-12);
    assert_eq!(ctx.n2(0.0, 0.5), 1.0);
    assert_eq!(ctx.z_functional(0.0, 0.5), 0.0);
    // a_N = phi = 1: omega = T.
    assert!((ctx.omega(0.0, 0.5) - 0.5).abs() < 1e-12);
    let rep = ctx.evaluate().unwrap();
    for e in &rep.entries {
        assert!(e.points.iter().all(|p| p.lhs == 0.0), "{}", e.id);
        assert!(e.ratios_finite && e.fitted_c == 0.0);
    }
}

#[test]
fn plug_in_n1_for_constant_top_coefficient() {
    let g = Grid2D::unit_square(4).unwrap();
    let mut sc = scenario(4, "0", |_, _| 0.0, 0.2, 0.1);
    sc.law = two_term(g, 1.0, 2.0);
    let out = run(&sc).unwrap();
    let p = pack();
    let ctx = BoundsContext::new(&sc, &out, p, 1.0, DEFAULT_WINDOW).unwrap();
    assert!((ctx.n1(0.0, 0.2) - 2f64.powf(p.r1_conj)).abs() < 1e-12);
}

#[test]
fn linear_boundary_data_matches_hand_integrals() {
    let eps = 0.3;
    let sc = scenario(16, "0.3 * t * x", |_, _| 0.0, 1.0, 0.05);
    let out = run(&sc).unwrap();
    let ctx = BoundsContext::new(&sc, &out, pack(), 1.0, DEFAULT_WINDOW).unwrap();
    let w1 = build_weights(&sc.law).unwrap().w1.integral();
    let grid = *sc.grid();
    // Midpoint rule for int x^2 on the grid.
    let x2: f64 = (0..grid.nx).map(|i| grid.x_center(i).powi(2)).sum::<f64>() / grid.nx as f64;
    let a = 0.5;
    for &t in &[0.25, 0.5, 1.0] {
        let e: f64 = eps * t;
        let expected = 1.0
            + e * e
            + e.powf(2.0 - a) * w1
            + (eps * eps * x2).powf((2.0 - a) / (2.0 * (1.0 - a)));
        assert!((ctx.data().g.at(t) - expected).abs() < 1e-12, "t = {t}");
        assert!((ctx.data().g1.at(t) - eps * eps).abs() < 1e-12);
    }
    let d = ctx.data();
    assert!(d.majorant.values.windows(2).all(|w| w[1] >= w[0]));
    assert!(d
        .majorant
        .values
        .iter()
        .zip(&d.g.values)
        .all(|(m, g)| m >= g));
    // G is increasing here, so there is no negative part of G'.
    assert_eq!(d.limit_b, 0.0);
}

#[test]
fn periodic_data_limit_is_max_over_a_period() {
    let sc = scenario(8, "0.2 * sin(2*pi*t) * x", |_, _| 0.0, 3.0, 1.0 / 64.0);
    let out = run(&sc).unwrap();
    let ctx = BoundsContext::new(&sc, &out, pack(), 1.0, 1.5).unwrap();
    let d = ctx.data();
    let period_max = d.g.max_over(1.0, 2.0);
    assert!((d.limit_a - period_max).abs() <= 1e-9 * period_max);
    assert!(d.limit_b > 0.0);
    assert_eq!(d.large_time_start, 1.0);
}

#[test]
fn steady_state_s_functional() {
    let g = Grid2D::unit_square(6).unwrap();
    let mut sc = scenario(6, "2", |_, _| 0.0, 0.3, 0.1);
    sc.law = two_term(g, 1.0, 3.0);
    let out = run(&sc).unwrap();
    let p = pack();
    let ctx = BoundsContext::new(&sc, &out, p, 1.0, DEFAULT_WINDOW).unwrap();
    let expected = 3f64.powf(p.a * p.r_conj / (4.0 * (2.0 - p.a)));
    assert!((ctx.s_functional(0.0, 0.3, 0.5) - expected).abs() < 1e-12);
    let rep = ctx.evaluate().unwrap();
    assert_eq!(rep.entry("rate_small_time").unwrap().fitted_c, 0.0);
}

#[test]
fn small_time_rhs_times_power_is_monotone() {
    let sc = scenario(
        8,
        "0.1 * sin(t) * (x + y)",
        |x, y| (PI * x).sin() * (PI * y).sin(),
        0.9,
        0.05,
    );
    let out = run(&sc).unwrap();
    let p = pack();
    let ctx = BoundsContext::new(&sc, &out, p, 1.0, DEFAULT_WINDOW).unwrap();
    let rep = ctx.evaluate().unwrap();
    let e = rep.entry("sup_small_time").unwrap();
    assert!(e.points.len() > 10);
    let scaled: Vec<f64> = e
        .points
        .iter()
        .map(|q| q.rhs * q.t.powf(p.kappa3))
        .collect();
    assert!(scaled.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    assert!(rep.entries.iter().all(|e| e.ratios_finite));
}

#[test]
fn n1_and_n2_agree_under_refinement() {
    let psi = "0.2 * sin(t) * exp(x) * cos(y) + 0.1 * t * y";
    let vals: Vec<(f64, f64, f64)> = [16, 32]
        .iter()
        .map(|&n| {
            let sc = scenario(n, psi, |_, _| 0.0, 1.0, 0.05);
            let out = run(&sc).unwrap();
            let ctx = BoundsContext::new(&sc, &out, pack(), 1.0, DEFAULT_WINDOW).unwrap();
            (ctx.n1(0.2, 1.0), ctx.n2(0.2, 1.0), ctx.omega(0.0, 1.0))
        })
        .collect();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    assert!(rel(vals[0].0, vals[1].0) < 1e-3, "{vals:?}");
    assert!(rel(vals[0].1, vals[1].1) < 1e-3, "{vals:?}");
    assert!(rel(vals[0].2, vals[1].2) < 1e-3, "{vals:?}");
}

#[test]
fn report_serializes_and_exports_csv() {
    let sc = scenario(
        8,
        "0.1 * sin(t)",
        |x, y| (PI * x).sin() * (PI * y).sin(),
        2.0,
        0.05,
    );
    let out = run(&sc).unwrap();
    let rep = BoundsContext::new(&sc, &out, pack(), 1.0, 1.0)
        .unwrap()
        .evaluate()
        .unwrap();
    let json = rep.to_json().unwrap();
    assert!(json.contains("\"schema_version\": 1"));
    let csv = rep.entry("l2_energy").unwrap().to_csv();
    assert!(csv.starts_with("t,lhs,rhs,ratio\n"));
    assert_eq!(
        csv.lines().count(),
        rep.entry("l2_energy").unwrap().points.len() + 1
    );
    // Energy bound holds with the unit constant for a dissipative run.
    assert!(rep.entry("l2_energy").unwrap().fitted_c <= 1.0);
}
