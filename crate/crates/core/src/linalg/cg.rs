//! Conjugate gradients for Hermitian positive definite maps on `r x r` matrices,
//! with the Frobenius inner product.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    /// Stop once `||map(X) - rhs||_F <= tol * ||rhs||_F`.
    pub tol: f64,
    /// Iterations per cycle; `None` means the dimension of the space (`r^2`).
    pub max_iter: Option<usize>,
    /// Restarts from the current iterate with a recomputed residual.
    pub restarts: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-10,
            max_iter: None,
            restarts: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgReport {
    pub solution: DMatrix<C>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &DMatrix<C>, b: &DMatrix<C>) -> C {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn cg_solve<F>(map: F, rhs: &DMatrix<C>, opts: &CgOptions) -> Result<CgReport>
where
    F: Fn(&DMatrix<C>) -> DMatrix<C>,
{
    cg_solve_observed(map, rhs, opts, |_, _| {})
}

/// As [`cg_solve`], calling `observe(k, x_k)` after every iteration.
pub fn cg_solve_observed<F, O>(
    map: F,
    rhs: &DMatrix<C>,
    opts: &CgOptions,
    mut observe: O,
) -> Result<CgReport>
where
    F: Fn(&DMatrix<C>) -> DMatrix<C>,
    O: FnMut(usize, &DMatrix<C>),
{
    let rhs_norm = rhs.norm();
    let mut x = DMatrix::<C>::zeros(rhs.nrows(), rhs.ncols());
    if rhs_norm == 0.0 {
        return Ok(CgReport {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let per_cycle = opts.max_iter.unwrap_or(rhs.len()).max(1);
    let target = opts.tol * rhs_norm;
    let mut iterations = 0;
    let mut rel = 1.0;

    for _cycle in 0..=opts.restarts {
        let mut r = if iterations == 0 { rhs.clone() } else { rhs - map(&x) };
        let mut rr = r.norm_squared();
        if rr.sqrt() <= target {
            rel = rr.sqrt() / rhs_norm;
            break;
        }
        let mut p = r.clone();
        for _ in 0..per_cycle {
            let ap = map(&p);
            let curvature = dot(&p, &ap).re;
            if curvature <= 0.0 {
                return Err(Error::Indefinite {
                    curvature: curvature / p.norm_squared(),
                });
            }
            let step = rr / curvature;
            x += &p * C::new(step, 0.0);
            r -= &ap * C::new(step, 0.0);
            iterations += 1;
            observe(iterations, &x);
            let rr_next = r.norm_squared();
            rel = rr_next.sqrt() / rhs_norm;
            if rr_next.sqrt() <= target {
                return Ok(CgReport {
                    solution: x,
                    iterations,
                    relative_residual: rel,
                });
            }
            p = &r + &p * C::new(rr_next / rr, 0.0);
            rr = rr_next;
        }
    }
    if rel * rhs_norm <= target {
        return Ok(CgReport {
            solution: x,
            iterations,
            relative_residual: rel,
        });
    }
    Err(Error::CgNoConvergence {
        iterations,
        residual: rel,
    })
}
