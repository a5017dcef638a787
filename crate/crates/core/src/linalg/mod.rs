//! Matrix-free iterative kernels: truncated SVD by Lanczos bidiagonalization and
//! conjugate gradients on Hermitian positive definite maps.

mod cg;
mod lanczos;

pub use cg::{cg_solve, cg_solve_observed, CgOptions, CgReport};
pub use lanczos::{lanczos_truncated_svd, LanczosOptions};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Leading singular triplets `U diag(sigma) V^H`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: DMatrix<Complex64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<Complex64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Rotates each pair `(u_i, v_i)` by a common phase so the largest-magnitude
    /// entry of `u_i` is real and positive. The product `U diag(sigma) V^H` is unchanged.
    pub fn normalize_phases(&mut self) {
        for i in 0..self.rank() {
            let col = self.u.column(i);
            let Some(pivot) = col
                .iter()
                .copied()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            else {
                continue;
            };
            if pivot.norm() == 0.0 {
                continue;
            }
            let phase = pivot.conj() / pivot.norm();
            for z in self.u.column_mut(i).iter_mut() {
                *z *= phase;
            }
            for z in self.v.column_mut(i).iter_mut() {
                *z *= phase;
            }
        }
    }

    /// Dense `U diag(sigma) V^H`; test helper for small problems.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut us = self.u.clone();
        for (i, s) in self.sigma.iter().enumerate() {
            us.column_mut(i).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}
