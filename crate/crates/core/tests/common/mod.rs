#![allow(dead_code)]

use lppg_core::hankel::{hankel_adjoint_dense, hankel_embed, HankelShape};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C = Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cvec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
    (0..n)
        .map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

pub fn cmat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<C> {
    DMatrix::from_vec(rows, cols, cvec(rows * cols, rng))
}

pub fn orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<C> {
    cmat(rows, cols, rng).qr().q()
}

pub fn norm(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dist(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn frob_inner(a: &DMatrix<C>, b: &DMatrix<C>) -> C {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Dense least squares `min ||A z - b||` through the SVD.
pub fn lstsq(a: &DMatrix<C>, b: &DVector<C>) -> DVector<C> {
    a.clone().svd(true, true).solve(b, 1e-14).expect("svd solve")
}

/// The signal minimizing
/// `1/2 ||s - P x||^2 + beta/2 ||H - H(x)||_F^2 + alpha/2 ||x||^2` for a dense `H`,
/// found by stacking the three residual blocks into one least-squares system.
/// Returns the minimizer and the minimum value.
pub fn dense_inner_min(
    h: &DMatrix<C>,
    samples: &[C],
    observed: &[bool],
    shape: &HankelShape,
    alpha: f64,
    beta: f64,
) -> (Vec<C>, f64) {
    let n = shape.len();
    let (p, q) = (shape.rows(), shape.cols());
    let m = n + p * q + n;
    let mut a = DMatrix::<C>::zeros(m, n);
    let mut b = DVector::<C>::zeros(m);
    let sb = beta.sqrt();
    let sa = alpha.sqrt();
    for i in 0..n {
        if observed[i] {
            a[(i, i)] = C::new(1.0, 0.0);
            b[i] = samples[i];
        }
        let mut e = vec![C::new(0.0, 0.0); n];
        e[i] = C::new(1.0, 0.0);
        let col = hankel_embed(&e, shape).unwrap();
        for (k, z) in col.iter().enumerate() {
            a[(n + k, i)] = z * sb;
        }
        a[(n + p * q + i, i)] = C::new(sa, 0.0);
    }
    for (k, z) in h.iter().enumerate() {
        b[n + k] = z * sb;
    }
    let x = lstsq(&a, &b);
    let x: Vec<C> = x.iter().copied().collect();
    (x.clone(), dense_f(h, &x, samples, observed, shape, alpha, beta))
}

pub fn dense_f(
    h: &DMatrix<C>,
    x: &[C],
    samples: &[C],
    observed: &[bool],
    shape: &HankelShape,
    alpha: f64,
    beta: f64,
) -> f64 {
    let data: f64 = (0..x.len())
        .filter(|&i| observed[i])
        .map(|i| (samples[i] - x[i]).norm_sqr())
        .sum();
    let mis = (h - hankel_embed(x, shape).unwrap()).norm_squared();
    let reg: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    0.5 * data + 0.5 * beta * mis + 0.5 * alpha * reg
}

/// `H^* M` by explicit anti-diagonal sums.
pub fn adjoint(m: &DMatrix<C>, shape: &HankelShape) -> Vec<C> {
    hankel_adjoint_dense(m, shape).unwrap()
}
