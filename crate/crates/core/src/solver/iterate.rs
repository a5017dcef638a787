use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::hankel::{guard_dense, HankelShape};
use crate::linalg::TruncatedSvd;

type C = Complex64;

/// Rank-`r` matrix `U Sigma V^H` with orthonormal `U` (P x r) and `V` (Q x r).
/// `Sigma` is a general square core.
#[derive(Clone, Debug)]
pub struct LowRankIterate {
    pub u: DMatrix<C>,
    pub sigma: DMatrix<C>,
    pub v: DMatrix<C>,
}

impl LowRankIterate {
    pub fn new(u: DMatrix<C>, sigma: DMatrix<C>, v: DMatrix<C>) -> Result<Self> {
        let r = sigma.nrows();
        check_len("core columns", r, sigma.ncols())?;
        check_len("left factor rank", r, u.ncols())?;
        check_len("right factor rank", r, v.ncols())?;
        if r > u.nrows() || r > v.nrows() {
            return Err(Error::Parameter(format!(
                "rank {r} exceeds a {} x {} matrix",
                u.nrows(),
                v.nrows()
            )));
        }
        Ok(LowRankIterate { u, sigma, v })
    }

    pub fn from_svd(svd: TruncatedSvd) -> Self {
        let sigma = DMatrix::from_fn(svd.rank(), svd.rank(), |i, j| {
            if i == j {
                C::new(svd.sigma[i], 0.0)
            } else {
                C::new(0.0, 0.0)
            }
        });
        LowRankIterate {
            u: svd.u,
            sigma,
            v: svd.v,
        }
    }

    /// The zero matrix carried on the first `r` coordinate directions.
    pub fn zero(rows: usize, cols: usize, rank: usize) -> Self {
        LowRankIterate {
            u: DMatrix::identity(rows, rank),
            sigma: DMatrix::zeros(rank, rank),
            v: DMatrix::identity(cols, rank),
        }
    }

    pub fn rank(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// `U Sigma`, the left factor paired with `V`.
    pub fn left(&self) -> DMatrix<C> {
        &self.u * &self.sigma
    }

    /// `||U Sigma V^H||_F = ||Sigma||_F`.
    pub fn frobenius_norm(&self) -> f64 {
        self.sigma.norm()
    }

    /// `<self, other>` in the Frobenius inner product, from the factors.
    pub fn inner(&self, other: &LowRankIterate) -> C {
        let uu = self.u.adjoint() * &other.u;
        let vv = other.v.adjoint() * &self.v;
        (self.sigma.adjoint() * uu * &other.sigma * vv).trace()
    }

    /// `||self - other||_F^2`, clamped at zero.
    pub fn distance_sq(&self, other: &LowRankIterate) -> f64 {
        let a = self.sigma.norm_squared();
        let b = other.sigma.norm_squared();
        (a + b - 2.0 * self.inner(other).re).max(0.0)
    }

    /// Dense `U Sigma V^H`, counted against the dense-size guard.
    pub fn to_dense(&self, shape: &HankelShape) -> Result<DMatrix<C>> {
        guard_dense(shape)?;
        check_len("iterate rows", shape.rows(), self.rows())?;
        check_len("iterate columns", shape.cols(), self.cols())?;
        Ok(self.left() * self.v.adjoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal(rows: usize, r: usize, seed: f64) -> DMatrix<C> {
        let m = DMatrix::from_fn(rows, r, |i, j| {
            C::new(((i * 7 + j * 3) as f64 + seed).sin(), ((i + 5 * j) as f64 * seed).cos())
        });
        m.qr().q()
    }

    #[test]
    fn factored_norms_match_dense() {
        let shape = HankelShape::one_d(9, 4).unwrap();
        let a = LowRankIterate::new(
            orthonormal(4, 2, 0.3),
            DMatrix::from_fn(2, 2, |i, j| C::new(i as f64 + 1.0, j as f64 - 0.5)),
            orthonormal(6, 2, 1.1),
        )
        .unwrap();
        let b = LowRankIterate::new(
            orthonormal(4, 2, 2.0),
            DMatrix::from_fn(2, 2, |i, j| C::new(0.2 * j as f64, 1.0 - i as f64)),
            orthonormal(6, 2, 0.7),
        )
        .unwrap();
        let (da, db) = (a.to_dense(&shape).unwrap(), b.to_dense(&shape).unwrap());
        assert!((a.frobenius_norm() - da.norm()).abs() < 1e-12);
        assert!((a.distance_sq(&b) - (&da - &db).norm_squared()).abs() < 1e-12);
        let direct: C = da.iter().zip(db.iter()).map(|(x, y)| x.conj() * y).sum();
        assert!((a.inner(&b) - direct).norm() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_factors() {
        assert!(LowRankIterate::new(DMatrix::zeros(4, 2), DMatrix::zeros(3, 3), DMatrix::zeros(5, 2)).is_err());
        assert!(LowRankIterate::new(DMatrix::zeros(1, 2), DMatrix::zeros(2, 2), DMatrix::zeros(5, 2)).is_err());
    }

    #[test]
    fn zero_iterate() {
        let z = LowRankIterate::zero(5, 4, 2);
        assert_eq!(z.frobenius_norm(), 0.0);
        assert_eq!(z.distance_sq(&z), 0.0);
    }
}
