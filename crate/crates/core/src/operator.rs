//! Matrix-free linear operators over complex vectors.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// A linear map `C^cols -> C^rows` together with its adjoint.
///
/// Implementations must satisfy `<apply(x), y> = <x, apply_adjoint(y)>` under the
/// inner product that is conjugate-linear in its first argument.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;
}

impl LinearOperator for DMatrix<Complex64> {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn cols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows()];
        for (j, xj) in x.iter().enumerate() {
            for (yi, a) in y.iter_mut().zip(self.column(j).iter()) {
                *yi += a * xj;
            }
        }
        y
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        (0..self.ncols())
            .map(|j| {
                self.column(j)
                    .iter()
                    .zip(y)
                    .map(|(a, b)| a.conj() * b)
                    .sum()
            })
            .collect()
    }
}

/// `<a, b> = sum conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
