//! Thick-restarted Golub-Kahan-Lanczos bidiagonalization with full
//! reorthogonalization.
//!
//! After `k` steps the bases satisfy `A V_k = U_k B_k` and
//! `A^H U_k = V_k B_k^T + f e_k^T`, with `B_k` real upper triangular (bidiagonal
//! apart from the restart column). Ritz triplets come from the SVD of `B_k`; the
//! residual of triplet `i` is `|beta_k X[k-1, i]|`. On restart the leading Ritz
//! vectors are kept and the process continues from `f / beta_k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TruncatedSvd;
use crate::error::{Error, Result};
use crate::operator::{inner, norm2, LinearOperator};

type C = Complex64;

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// Relative residual target: `||A^H u_i - sigma_i v_i|| <= tol * sigma_1`.
    pub tol: f64,
    /// Total bidiagonalization steps; `None` means `30 * r`.
    pub max_steps: Option<usize>,
    /// Krylov basis size before a restart; `None` picks `max(2r, r + 10)`.
    pub basis_size: Option<usize>,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-10,
            max_steps: None,
            basis_size: None,
            seed: 0,
        }
    }
}

pub fn lanczos_truncated_svd(
    op: &dyn LinearOperator,
    rank: usize,
    opts: &LanczosOptions,
) -> Result<TruncatedSvd> {
    let (m, n) = (op.rows(), op.cols());
    let full = m.min(n);
    if rank == 0 || rank > full {
        return Err(Error::Parameter(format!(
            "rank {rank} must lie in 1..={full} for a {m} x {n} operator"
        )));
    }
    let k = opts
        .basis_size
        .unwrap_or((2 * rank).max(rank + 10))
        .clamp(rank, full);
    if k == rank {
        return dense_fallback(op, rank);
    }
    let max_steps = opts.max_steps.unwrap_or(30 * rank).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut vs: Vec<Vec<C>> = Vec::with_capacity(k + 1);
    let mut us: Vec<Vec<C>> = Vec::with_capacity(k);
    let mut b = DMatrix::<f64>::zeros(k, k);
    let mut kept = 0;
    let mut steps = 0;
    let mut norm_est = 0.0f64;

    let mut v0 = random_unit(n, &mut rng);
    orthonormalize_against(&mut v0, &vs, &mut rng);
    vs.push(v0);

    loop {
        let mut beta_k = 0.0;
        let mut residual = vec![C::new(0.0, 0.0); n];
        for j in kept..k {
            steps += 1;
            let mut w = op.apply(&vs[j]);
            for (i, ui) in us.iter().enumerate() {
                let coef = b[(i, j)];
                if coef != 0.0 {
                    axpy(&mut w, -coef, ui);
                }
            }
            reorthogonalize(&mut w, &us);
            let alpha = norm2(&w);
            norm_est = norm_est.max(alpha);
            if alpha <= 1e-14 * norm_est {
                w = random_unit(m, &mut rng);
                orthonormalize_against(&mut w, &us, &mut rng);
                b[(j, j)] = 0.0;
            } else {
                scale_in_place(&mut w, 1.0 / alpha);
                b[(j, j)] = alpha;
            }
            us.push(w);

            let mut z = op.apply_adjoint(&us[j]);
            axpy(&mut z, -b[(j, j)], &vs[j]);
            reorthogonalize(&mut z, &vs);
            let beta = norm2(&z);
            norm_est = norm_est.max(beta);
            if j + 1 < k {
                if beta <= 1e-14 * norm_est {
                    z = random_unit(n, &mut rng);
                    orthonormalize_against(&mut z, &vs, &mut rng);
                } else {
                    scale_in_place(&mut z, 1.0 / beta);
                    b[(j, j + 1)] = beta;
                }
                vs.push(z);
            } else {
                beta_k = beta;
                residual = z;
            }
        }

        let svd = b.clone().svd(true, true);
        let (x, yt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &c| svd.singular_values[c].total_cmp(&svd.singular_values[a]));
        let sigma_1 = svd.singular_values[order[0]];
        let residuals: Vec<f64> = order[..rank]
            .iter()
            .map(|&i| (beta_k * x[(k - 1, i)]).abs())
            .collect();
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        let converged = worst <= opts.tol * sigma_1 || beta_k == 0.0;

        let ritz = |count: usize| -> TruncatedSvd {
            let mut u = DMatrix::<C>::zeros(m, count);
            let mut v = DMatrix::<C>::zeros(n, count);
            let mut sigma = Vec::with_capacity(count);
            for (c, &i) in order[..count].iter().enumerate() {
                sigma.push(svd.singular_values[i]);
                for (t, ut) in us.iter().enumerate() {
                    let coef = x[(t, i)];
                    if coef != 0.0 {
                        for (dst, src) in u.column_mut(c).iter_mut().zip(ut) {
                            *dst += src * coef;
                        }
                    }
                }
                for (t, vt) in vs.iter().take(k).enumerate() {
                    let coef = yt[(i, t)];
                    if coef != 0.0 {
                        for (dst, src) in v.column_mut(c).iter_mut().zip(vt) {
                            *dst += src * coef;
                        }
                    }
                }
            }
            TruncatedSvd { u, sigma, v }
        };

        if converged {
            if rank < k {
                let next = svd.singular_values[order[rank]];
                if svd.singular_values[order[rank - 1]] - next < 1e-12 * sigma_1 {
                    log::debug!(
                        "near-degenerate singular values at the truncation rank {rank} (gap < 1e-12 sigma_1)"
                    );
                }
            }
            let mut out = ritz(rank);
            out.normalize_phases();
            return Ok(out);
        }
        if steps >= max_steps {
            let mut best = ritz(rank);
            best.normalize_phases();
            return Err(Error::LanczosNoConvergence {
                steps,
                worst_residual: worst / sigma_1.max(f64::MIN_POSITIVE),
                best: Box::new(best),
                residuals,
            });
        }

        // Thick restart: keep the leading Ritz pairs and continue from f / beta_k.
        let keep = (rank + (k - rank) / 2).min(k - 1).max(rank);
        let restart = ritz(keep);
        let rho: Vec<f64> = order[..keep]
            .iter()
            .map(|&i| beta_k * x[(k - 1, i)])
            .collect();
        us = restart.u.column_iter().map(|c| c.iter().copied().collect()).collect();
        vs = restart.v.column_iter().map(|c| c.iter().copied().collect()).collect();
        scale_in_place(&mut residual, 1.0 / beta_k);
        reorthogonalize(&mut residual, &vs);
        let nr = norm2(&residual);
        scale_in_place(&mut residual, 1.0 / nr);
        vs.push(residual);
        b.fill(0.0);
        for (i, (&s, &r)) in restart.sigma.iter().zip(&rho).enumerate() {
            b[(i, i)] = s;
            b[(i, keep)] = r;
        }
        kept = keep;
    }
}

/// Used when the requested rank fills the smaller dimension, so no restart space exists.
fn dense_fallback(op: &dyn LinearOperator, rank: usize) -> Result<TruncatedSvd> {
    let (m, n) = (op.rows(), op.cols());
    let mut dense = DMatrix::<C>::zeros(m, n);
    for j in 0..n {
        let mut e = vec![C::new(0.0, 0.0); n];
        e[j] = C::new(1.0, 0.0);
        for (dst, src) in dense.column_mut(j).iter_mut().zip(op.apply(&e)) {
            *dst = src;
        }
    }
    let svd = dense.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &c| svd.singular_values[c].total_cmp(&svd.singular_values[a]));
    let order = &order[..rank];
    let mut out = TruncatedSvd {
        u: DMatrix::from_fn(m, rank, |i, c| u[(i, order[c])]),
        sigma: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v: DMatrix::from_fn(n, rank, |j, c| vt[(order[c], j)].conj()),
    };
    out.normalize_phases();
    Ok(out)
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
    let mut v: Vec<C> = (0..n)
        .map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let nv = norm2(&v);
    scale_in_place(&mut v, 1.0 / nv);
    v
}

fn orthonormalize_against(v: &mut Vec<C>, basis: &[Vec<C>], rng: &mut ChaCha8Rng) {
    for _ in 0..4 {
        reorthogonalize(v, basis);
        let nv = norm2(v);
        if nv > 1e-8 {
            scale_in_place(v, 1.0 / nv);
            return;
        }
        *v = random_unit(v.len(), rng);
    }
}

/// Two passes of classical Gram-Schmidt against an orthonormal basis.
fn reorthogonalize(w: &mut [C], basis: &[Vec<C>]) {
    for _ in 0..2 {
        let coefs: Vec<C> = basis.iter().map(|q| inner(q, w)).collect();
        for (q, c) in basis.iter().zip(coefs) {
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= qi * c;
            }
        }
    }
}

fn axpy(y: &mut [C], a: f64, x: &[C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

fn scale_in_place(v: &mut [C], s: f64) {
    for z in v.iter_mut() {
        *z *= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C {
        C::new(x, 0.0)
    }

    fn check_triplets(op: &dyn LinearOperator, svd: &TruncatedSvd, tol: f64) {
        let r = svd.rank();
        let uu = svd.u.adjoint() * &svd.u;
        let vv = svd.v.adjoint() * &svd.v;
        let eye = DMatrix::<C>::identity(r, r);
        assert!((uu - &eye).norm() < 1e-10);
        assert!((vv - &eye).norm() < 1e-10);
        for w in svd.sigma.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for i in 0..r {
            let ui: Vec<C> = svd.u.column(i).iter().copied().collect();
            let vi: Vec<C> = svd.v.column(i).iter().copied().collect();
            let av = op.apply(&vi);
            let ahu = op.apply_adjoint(&ui);
            let r1: f64 = av
                .iter()
                .zip(&ui)
                .map(|(a, u)| (a - u * svd.sigma[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let r2: f64 = ahu
                .iter()
                .zip(&vi)
                .map(|(a, v)| (a - v * svd.sigma[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r1.max(r2) <= tol * svd.sigma[0], "triplet {i}: {r1:e} {r2:e}");
        }
    }

    #[test]
    fn diagonal_operator() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0), c(2.0), c(1.0)]));
        let svd = lanczos_truncated_svd(&a, 2, &LanczosOptions::default()).unwrap();
        assert!((svd.sigma[0] - 3.0).abs() < 1e-12);
        assert!((svd.sigma[1] - 2.0).abs() < 1e-12);
        // Axes up to phase; phase convention makes the pivot entry real positive.
        assert!((svd.u[(0, 0)] - c(1.0)).norm() < 1e-10);
        assert!((svd.u[(1, 1)] - c(1.0)).norm() < 1e-10);
        assert!((svd.v[(0, 0)] - c(1.0)).norm() < 1e-10);
        check_triplets(&a, &svd, 1e-10);
    }

    #[test]
    fn rank_one_outer_product() {
        let a = nalgebra::DVector::from_vec(vec![C::new(1.0, 1.0), c(2.0), C::new(0.0, -3.0), c(0.5)]);
        let bvec = nalgebra::DVector::from_vec(vec![c(1.0), C::new(0.0, 2.0), c(-1.0)]);
        let m = &a * bvec.adjoint();
        let svd = lanczos_truncated_svd(&m, 1, &LanczosOptions::default()).unwrap();
        assert!((svd.sigma[0] - a.norm() * bvec.norm()).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_svd_with_restarts() {
        // Geometric spectrum forces several restarts with a small basis.
        let (m, n) = (40, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q1 = nalgebra::DMatrix::<C>::from_fn(m, m, |_, _| C::new(rng.random(), rng.random()))
            .qr()
            .q();
        let q2 = nalgebra::DMatrix::<C>::from_fn(n, n, |_, _| C::new(rng.random(), rng.random()))
            .qr()
            .q();
        let mut d = DMatrix::<C>::zeros(m, n);
        for i in 0..n {
            d[(i, i)] = c(0.8f64.powi(i as i32));
        }
        let a = &q1 * d * q2.adjoint();
        let opts = LanczosOptions {
            basis_size: Some(8),
            max_steps: Some(400),
            ..Default::default()
        };
        let svd = lanczos_truncated_svd(&a, 4, &opts).unwrap();
        for i in 0..4 {
            assert!((svd.sigma[i] - 0.8f64.powi(i as i32)).abs() < 1e-9);
        }
        check_triplets(&a, &svd, 1e-9);
    }

    #[test]
    fn exactly_low_rank_operator_breaks_down_cleanly() {
        let a = DMatrix::<C>::from_fn(20, 15, |i, j| c((i + 1) as f64 * (j as f64 + 0.5)));
        let svd = lanczos_truncated_svd(&a, 3, &LanczosOptions::default()).unwrap();
        assert!(svd.sigma[1] < 1e-10 * svd.sigma[0]);
        check_triplets(&a, &svd, 1e-9);
    }

    #[test]
    fn non_convergence_reports_best_triplets() {
        let mut d = DMatrix::<C>::zeros(60, 60);
        for i in 0..60 {
            d[(i, i)] = c(1.0 - 1e-3 * i as f64);
        }
        let opts = LanczosOptions {
            basis_size: Some(6),
            max_steps: Some(6),
            tol: 1e-14,
            seed: 1,
        };
        match lanczos_truncated_svd(&d, 2, &opts) {
            Err(Error::LanczosNoConvergence { best, residuals, .. }) => {
                assert_eq!(best.rank(), 2);
                assert_eq!(residuals.len(), 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_rank() {
        let a = DMatrix::<C>::identity(3, 3);
        assert!(lanczos_truncated_svd(&a, 0, &LanczosOptions::default()).is_err());
        assert!(lanczos_truncated_svd(&a, 4, &LanczosOptions::default()).is_err());
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let a = DMatrix::<C>::from_fn(25, 20, |i, j| C::new((i * j % 7) as f64, (i + j) as f64 % 3.0));
        let o = LanczosOptions { seed: 42, ..Default::default() };
        let s1 = lanczos_truncated_svd(&a, 3, &o).unwrap();
        let s2 = lanczos_truncated_svd(&a, 3, &o).unwrap();
        assert_eq!(s1.sigma, s2.sigma);
        assert_eq!(s1.u, s2.u);
    }
}
