//! Shared fixtures for the kernel benchmarks.

use forchheimer::{Field, ForchheimerLaw, Grid2D};

/// Two-term law with a smoothly varying linear coefficient on an `n x n` unit square.
pub fn heterogeneous_law(n: usize) -> ForchheimerLaw {
    let grid = Grid2D::unit_square(n).expect("n >= 2");
    let a0 = Field::from_fn(grid, |x, _| {
        1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin()
    })
    .unwrap();
    let a1 = Field::from_fn(grid, |x, y| 0.5 + x * y).unwrap();
    ForchheimerLaw::new(vec![0.0, 1.0], vec![a0, a1]).unwrap()
}

/// The heterogeneous regression scenario on an `n x n` grid.
pub fn heterogeneous_scenario(n: usize) -> forchheimer::Scenario {
    let mut cfg =
        forchheimer::ScenarioConfig::parse(include_str!("../../core/scenarios/heterogeneous.toml"))
            .expect("scenario parses");
    cfg.grid.nx = n;
    cfg.grid.ny = n;
    cfg.scenario().expect("scenario is valid")
}
