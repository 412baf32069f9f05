//! Matrix-free five-point operator and Jacobi-preconditioned conjugate gradients.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Grid2D};

const CHUNK: usize = 2048;

/// Symmetric operator `(A u)_k = diag_k u_k - sum_faces T_f u_nb` on a
/// cell-centered grid. Face arrays use the layout of
/// [`crate::weighted_norms::FaceGradient`]; boundary-face entries only feed
/// the diagonal.
#[derive(Debug, Clone)]
pub struct StencilMatrix {
    pub grid: Grid2D,
    pub diag: Vec<f64>,
    pub tx: Vec<f64>,
    pub ty: Vec<f64>,
}

impl StencilMatrix {
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        out.par_chunks_mut(nx)
            .with_min_len((CHUNK / nx).max(1))
            .enumerate()
            .for_each(|(j, row)| {
                for (i, o) in row.iter_mut().enumerate() {
                    let k = j * nx + i;
                    let mut v = self.diag[k] * u[k];
                    if i > 0 {
                        v -= self.tx[j * (nx + 1) + i] * u[k - 1];
                    }
                    if i + 1 < nx {
                        v -= self.tx[j * (nx + 1) + i + 1] * u[k + 1];
                    }
                    if j > 0 {
                        v -= self.ty[j * nx + i] * u[k - nx];
                    }
                    if j + 1 < ny {
                        v -= self.ty[(j + 1) * nx + i] * u[k + nx];
                    }
                    *o = v;
                }
            });
    }
}

/// Dot product with a fixed reduction tree, independent of thread count.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .with_min_len(4)
        .map(|(x, y)| {
            let prod: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
            pairwise_sum(&prod)
        })
        .collect();
    pairwise_sum(&partial)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` to `||r|| <= rtol ||b||`, starting from the given `x`.
pub fn pcg(
    a: &StencilMatrix,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    if a.diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::LinearSolve("non-positive diagonal".into()));
    }
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    r.par_iter_mut()
        .with_min_len(CHUNK)
        .zip(b)
        .for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r
        .par_iter()
        .with_min_len(CHUNK)
        .zip(&a.diag)
        .map(|(ri, d)| ri / d)
        .collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= rtol {
            return Ok(CgOutcome {
                iterations: it,
                relative_residual: res,
            });
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolve(format!(
                "breakdown at iteration {it}: p.Ap = {pap}"
            )));
        }
        let alpha = rz / pap;
        x.par_iter_mut()
            .with_min_len(CHUNK)
            .zip(&p)
            .for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut()
            .with_min_len(CHUNK)
            .zip(&ap)
            .for_each(|(ri, api)| *ri -= alpha * api);
        z.par_iter_mut()
            .with_min_len(CHUNK)
            .zip(&r)
            .zip(&a.diag)
            .for_each(|((zi, ri), d)| *zi = ri / d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut()
            .with_min_len(CHUNK)
            .zip(&z)
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
        res = dot(&r, &r).sqrt() / bnorm;
    }
    if res <= rtol {
        return Ok(CgOutcome {
            iterations: max_iter,
            relative_residual: res,
        });
    }
    Err(Error::LinearSolve(format!(
        "no convergence in {max_iter} iterations (relative residual {res:e})"
    )))
}
