//! Structured cell-centered grids and the scalar fields that live on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform rectangular grid of `nx * ny` cells. Values are stored at cell
/// centers, row-major with `x` varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::validation(
                "grid",
                format!("need at least 2x2 cells, got {nx}x{ny}"),
            ));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::validation(
                "grid",
                "cell sizes must be positive and finite",
            ));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::validation("grid", "origin must be finite"));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            x0,
            y0,
        })
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0 / n as f64, 1.0 / n as f64, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn area(&self) -> f64 {
        self.cell_area() * self.len() as f64
    }

    pub fn lx(&self) -> f64 {
        self.dx * self.nx as f64
    }

    pub fn ly(&self) -> f64 {
        self.dy * self.ny as f64
    }

    #[inline]
    pub fn x_center(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn y_center(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.dy
    }

    pub fn cell_center(&self, k: usize) -> (f64, f64) {
        (self.x_center(k % self.nx), self.y_center(k / self.nx))
    }

    /// Grid with every cell split in two along each axis.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx,
            ny: 2 * self.ny,
            dx: 0.5 * self.dx,
            dy: 0.5 * self.dy,
            ..*self
        }
    }
}

/// Scalar field sampled at cell centers. Construction rejects NaN and Inf.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field has {} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (x, y) = grid.cell_center(k);
            return Err(Error::Domain(format!(
                "non-finite field value at ({x}, {y})"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.cell_center(k);
                f(x, y)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Domain("fields live on different grids".into()));
        }
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Midpoint-rule integral over the domain.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_area()
    }
}

/// Dirichlet data on the four sides, sampled at boundary face centers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryValues {
    /// `x = x0` side, one value per row.
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// `y = y0` side, one value per column.
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

impl BoundaryValues {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self::from_fn(grid, |_, _| 0.0)
    }

    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let xl = grid.x0;
        let xr = grid.x0 + grid.lx();
        let yb = grid.y0;
        let yt = grid.y0 + grid.ly();
        Self {
            left: (0..grid.ny).map(|j| f(xl, grid.y_center(j))).collect(),
            right: (0..grid.ny).map(|j| f(xr, grid.y_center(j))).collect(),
            bottom: (0..grid.nx).map(|i| f(grid.x_center(i), yb)).collect(),
            top: (0..grid.nx).map(|i| f(grid.x_center(i), yt)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .chain(&self.bottom)
            .chain(&self.top)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Snapshots of a field on a fixed grid at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid2D,
    times: Vec<f64>,
    slices: Vec<Field>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid2D, times: Vec<f64>, slices: Vec<Field>) -> Result<Self> {
        if times.len() != slices.len() {
            return Err(Error::Domain(format!(
                "{} times for {} slices",
                times.len(),
                slices.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "snapshot times must be strictly increasing".into(),
            ));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("non-finite snapshot time".into()));
        }
        if slices.iter().any(|s| *s.grid() != grid) {
            return Err(Error::Domain("slice grid does not match".into()));
        }
        Ok(Self {
            grid,
            times,
            slices,
        })
    }

    /// Samples `f(x, y, t)` at cell centers for every time.
    pub fn from_fn(
        grid: Grid2D,
        times: Vec<f64>,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<Self> {
        let slices = times
            .iter()
            .map(|&t| Field::from_fn(grid, |x, y| f(x, y, t)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, times, slices)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slices(&self) -> &[Field] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn slice(&self, n: usize) -> &Field {
        &self.slices[n]
    }

    /// Samples with `s <= t_n <= t`, with a small tolerance on the ends.
    pub fn window(&self, s: f64, t: f64) -> Result<Self> {
        let tol = 1e-9 * (1.0 + t.abs());
        let (times, slices): (Vec<_>, Vec<_>) = self
            .times
            .iter()
            .zip(&self.slices)
            .filter(|(&tn, _)| tn >= s - tol && tn <= t + tol)
            .map(|(&tn, f)| (tn, f.clone()))
            .unzip();
        Self::new(self.grid, times, slices)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Result<Self> {
        let slices = self
            .slices
            .iter()
            .map(|s| s.map(f))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid, self.times.clone(), slices)
    }

    pub fn max_abs(&self) -> f64 {
        self.slices.iter().fold(0.0, |m, s| m.max(s.max_abs()))
    }
}

/// Pairwise summation with a fixed split, so results do not depend on
/// thread count or call site.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Trapezoidal rule for samples `(t_n, v_n)`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(times.len(), values.len());
    let terms: Vec<f64> = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .collect();
    pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid2D::new(1, 4, 0.1, 0.1, 0.0, 0.0).is_err());
        assert!(Grid2D::new(4, 4, 0.0, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_nan_values() {
        let g = Grid2D::unit_square(2).unwrap();
        let err = Field::new(g, vec![0.0, f64::NAN, 1.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }

    #[test]
    fn window_selects_inclusive_range() {
        let g = Grid2D::unit_square(2).unwrap();
        let st = SpaceTimeField::from_fn(g, vec![0.0, 0.5, 1.0, 1.5], |_, _, t| t).unwrap();
        let w = st.window(0.5, 1.0).unwrap();
        assert_eq!(w.times(), &[0.5, 1.0]);
    }

    #[test]
    fn times_must_increase() {
        let g = Grid2D::unit_square(2).unwrap();
        assert!(SpaceTimeField::from_fn(g, vec![0.0, 0.0], |_, _, _| 1.0).is_err());
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let t = [0.0, 0.25, 1.0];
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &v) - 2.5).abs() < 1e-15);
    }
}
