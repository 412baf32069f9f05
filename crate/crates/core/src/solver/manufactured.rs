use crate::constitutive::{Exponents, ForchheimerLaw};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::grid::{Field, Grid2D};

use super::{BoundaryData, PicardOptions, Scenario, Source};

/// Step for the divergence of the analytic flux.
const DIV_STEP: f64 = 1e-3;

/// Prescribed exact pressure with analytic coefficients; the forcing is
/// whatever makes it solve the equation.
#[derive(Debug, Clone)]
pub struct ManufacturedSolution {
    exact: Expr,
    exact_x: Expr,
    exact_y: Expr,
    exact_t: Expr,
    exponents: Exponents,
    exponent_values: Vec<f64>,
    coefficients: Vec<Expr>,
    porosity: Expr,
}

impl ManufacturedSolution {
    pub fn new(
        exact: Expr,
        exponents: &[f64],
        coefficients: Vec<Expr>,
        porosity: Expr,
    ) -> Result<Self> {
        if coefficients.len() != exponents.len() {
            return Err(Error::validation(
                "law.coefficients",
                "one coefficient per exponent",
            ));
        }
        if coefficients.iter().any(|c| c.depends_on(Var::T)) || porosity.depends_on(Var::T) {
            return Err(Error::validation(
                "law.coefficients",
                "coefficients and porosity must not depend on t",
            ));
        }
        Ok(Self {
            exact_x: exact.diff(Var::X),
            exact_y: exact.diff(Var::Y),
            exact_t: exact.diff(Var::T),
            exact,
            exponents: Exponents::new(exponents)?,
            exponent_values: exponents.to_vec(),
            coefficients,
            porosity,
        })
    }

    pub fn exact(&self) -> &Expr {
        &self.exact
    }

    pub fn exact_value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.exact.eval(x, y, t)
    }

    fn flux(&self, x: f64, y: f64, t: f64) -> Result<[f64; 2]> {
        let coeffs: Vec<f64> = self
            .coefficients
            .iter()
            .map(|c| c.eval(x, y, 0.0))
            .collect();
        let gx = self.exact_x.eval(x, y, t);
        let gy = self.exact_y.eval(x, y, t);
        let k = if coeffs.len() == 1 {
            1.0 / coeffs[0]
        } else {
            self.exponents.at(&coeffs).k(gx.hypot(gy))?
        };
        Ok([k * gx, k * gy])
    }

    /// `phi p_t - div(K grad p)` at `(x, y, t)`.
    pub fn source(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let h = DIV_STEP;
        let d4 = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
            Ok((-f(2.0 * h)? + 8.0 * f(h)? - 8.0 * f(-h)? + f(-2.0 * h)?) / (12.0 * h))
        };
        let div =
            d4(&|s| Ok(self.flux(x + s, y, t)?[0]))? + d4(&|s| Ok(self.flux(x, y + s, t)?[1]))?;
        Ok(self.porosity.eval(x, y, 0.0) * self.exact_t.eval(x, y, t) - div)
    }

    /// Scenario whose boundary data, initial data and forcing all come from the exact solution.
    pub fn scenario(
        &self,
        grid: Grid2D,
        t_end: f64,
        dt: f64,
        picard: PicardOptions,
    ) -> Result<Scenario> {
        let fields = self
            .coefficients
            .iter()
            .map(|c| Field::from_fn(grid, |x, y| c.eval(x, y, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        let law = if fields.len() == 1 {
            ForchheimerLaw::darcy(fields.into_iter().next().unwrap())?
        } else {
            ForchheimerLaw::new(self.exponent_values.clone(), fields)?
        };
        Ok(Scenario {
            law,
            porosity: Field::from_fn(grid, |x, y| self.porosity.eval(x, y, 0.0))?,
            boundary: BoundaryData::new(self.exact.clone()),
            initial: Field::from_fn(grid, |x, y| self.exact.eval(x, y, 0.0))?,
            t_end,
            dt,
            snapshot_every: 1,
            picard,
            source: Some(Source::Manufactured(Box::new(self.clone()))),
        })
    }

    /// Max-norm error of `p` against the exact solution at time `t`.
    pub fn max_error(&self, p: &Field, t: f64) -> f64 {
        let g = p.grid();
        (0..g.len())
            .map(|k| {
                let (x, y) = g.cell_center(k);
                (p.values()[k] - self.exact.eval(x, y, t)).abs()
            })
            .fold(0.0, f64::max)
    }
}
