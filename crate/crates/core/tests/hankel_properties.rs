mod common;

use common::*;
use lppg_core::hankel::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn families() -> Vec<Vec<usize>> {
    vec![vec![5], vec![31], vec![63], vec![255], vec![31, 31], vec![15, 15, 15], vec![7, 4], vec![4, 3, 5]]
}

#[test]
fn adjoint_identity_across_families() {
    for (f, dims) in families().into_iter().enumerate() {
        let shape = HankelShape::balanced(&dims).unwrap();
        let plan = HankelPlan::new(&shape);
        for case in 0..20u64 {
            let mut g = rng(1000 * f as u64 + case);
            let x = cvec(shape.len(), &mut g);
            let v = cvec(shape.cols(), &mut g);
            let u = cvec(shape.rows(), &mut g);
            // <H(x) v, u> = <H(x), u v^H> = <x, H^*(u v^H)>
            let spec = plan.spectrum(&x).unwrap();
            let hv = plan.matvec(&spec, &v).unwrap();
            let lhs: C = hv.iter().zip(&u).map(|(a, b)| a.conj() * b).sum();
            let um = DMatrix::from_column_slice(shape.rows(), 1, &u);
            let vm = DMatrix::from_column_slice(shape.cols(), 1, &v);
            let y = plan.adjoint_lowrank(&um, &vm).unwrap();
            let rhs: C = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
            let scale = norm(&x) * norm(&u) * norm(&v);
            assert!((lhs - rhs).norm() < 1e-10 * scale, "{dims:?} case {case}");
            if shape.len() <= 256 {
                let dense_y = DMatrix::from_fn(shape.rows(), shape.cols(), |i, j| u[i] * v[j].conj());
                let hx = hankel_embed(&x, &shape).unwrap();
                let lhs = frob_inner(&hx, &dense_y);
                let rhs: C = x.iter().zip(adjoint(&dense_y, &shape)).map(|(a, b)| a.conj() * b).sum();
                assert!((lhs - rhs).norm() < 1e-10 * norm(&x) * dense_y.norm());
            }
        }
    }
}

#[test]
fn weight_consistency_and_left_inverse() {
    for (f, dims) in families().into_iter().enumerate() {
        let shape = HankelShape::balanced(&dims).unwrap();
        let w = shape.weights().to_f64();
        let x = cvec(shape.len(), &mut rng(77 + f as u64));
        let hx = hankel_embed(&x, &shape).unwrap();
        let y = adjoint(&hx, &shape);
        for ((yi, xi), wi) in y.iter().zip(&x).zip(&w) {
            assert!((yi - xi * *wi).norm() <= 1e-12 * wi * xi.norm().max(1e-300));
        }
        let back = hankel_left_inverse_dense(&hx, &shape).unwrap();
        assert!(dist(&back, &x) <= 1e-12 * norm(&x));
        // Factored path on the identity factorization H(x) = H(x) * I.
        let eye = DMatrix::<C>::identity(shape.cols(), shape.cols());
        let back = hankel_left_inverse(&hx, &eye, &shape).unwrap();
        assert!(dist(&back, &x) <= 1e-12 * norm(&x));
    }
}

#[test]
fn multilevel_index_map_is_a_bijection_with_weight_counts() {
    for dims in [vec![5], vec![31], vec![63], vec![255], vec![31, 31], vec![9, 9, 9], vec![6, 7], vec![4, 3, 5]] {
        let shape = HankelShape::balanced(&dims).unwrap();
        if shape.len() > 1000 {
            continue;
        }
        let mut counts = vec![0usize; shape.len()];
        let mut cells = 0usize;
        for u in 0..shape.rows() {
            for v in 0..shape.cols() {
                // Recompute the index from per-level digits, independent of the library.
                let (mut uu, mut vv, mut idx, mut stride) = (u, v, 0, 1);
                for l in shape.levels() {
                    idx += (uu % l.p + vv % l.q) * stride;
                    uu /= l.p;
                    vv /= l.q;
                    stride *= l.n;
                }
                assert_eq!(idx, shape.signal_index(u, v));
                counts[idx] += 1;
                cells += 1;
            }
        }
        assert_eq!(cells, shape.rows() * shape.cols());
        assert_eq!(counts, shape.weights().values().to_vec());
    }
}

#[test]
fn fft_paths_match_dense_for_small_signals() {
    for dims in [vec![5], vec![31], vec![64], vec![255], vec![15, 15], vec![6, 5, 4]] {
        let shape = HankelShape::balanced(&dims).unwrap();
        let plan = HankelPlan::new(&shape);
        let mut g = rng(dims.iter().product::<usize>() as u64);
        let x = cvec(shape.len(), &mut g);
        let hx = hankel_embed(&x, &shape).unwrap();
        let spec = plan.spectrum(&x).unwrap();
        let v = cvec(shape.cols(), &mut g);
        let u = cvec(shape.rows(), &mut g);
        let dv = &hx * DMatrix::from_column_slice(v.len(), 1, &v);
        let du = hx.adjoint() * DMatrix::from_column_slice(u.len(), 1, &u);
        let fv = plan.matvec(&spec, &v).unwrap();
        let fu = plan.rmatvec(&spec, &u).unwrap();
        assert!(dist(&fv, dv.as_slice()) < 1e-10 * dv.norm());
        assert!(dist(&fu, du.as_slice()) < 1e-10 * du.norm());
        let a = cmat(shape.rows(), 3, &mut g);
        let b = cmat(shape.cols(), 3, &mut g);
        let dense = adjoint(&(&a * b.adjoint()), &shape);
        let fast = plan.adjoint_lowrank(&a, &b).unwrap();
        assert!(dist(&fast, &dense) < 1e-10 * norm(&dense));
        let pairs = plan.adjoint_pairs(&a, &b).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                let m = a.column(i) * b.column(j).adjoint();
                let want = adjoint(&m, &shape);
                assert!(dist(&pairs[i + 3 * j], &want) < 1e-10 * norm(&want));
            }
        }
    }
}

#[test]
fn low_rank_signal_has_low_rank_embedding() {
    use lppg_core::model::generate_signal;
    for (dims, r) in [(vec![63], 5), (vec![15, 15], 4), (vec![9, 9, 9], 3)] {
        let shape = HankelShape::balanced(&dims).unwrap();
        let (x, _) = generate_signal(&dims, r, false, 21).unwrap();
        let sv = hankel_embed(&x, &shape).unwrap().singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!(s[r] < 1e-8 * s[0], "{dims:?}: {} vs {}", s[r], s[0]);
        assert!(s[r - 1] > 1e-6 * s[0]);
    }
}

fn shape_strategy() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((1usize..12).prop_flat_map(|n| (Just(n), 1..=n)), 1..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_cell_count(levels in shape_strategy()) {
        let lv: Vec<Level> = levels.iter().map(|&(n, p)| Level::new(n, p, n + 1 - p).unwrap()).collect();
        let shape = HankelShape::new(lv).unwrap();
        let w = shape.weights();
        prop_assert_eq!(w.total(), shape.rows() * shape.cols());
        prop_assert!(w.values().iter().all(|&v| v >= 1));
    }

    #[test]
    fn fft_matvec_matches_dense(levels in shape_strategy(), seed in any::<u64>()) {
        let lv: Vec<Level> = levels.iter().map(|&(n, p)| Level::new(n, p, n + 1 - p).unwrap()).collect();
        let shape = HankelShape::new(lv).unwrap();
        let mut g = rng(seed);
        let x = cvec(shape.len(), &mut g);
        let v = cvec(shape.cols(), &mut g);
        let dense = hankel_embed(&x, &shape).unwrap() * DMatrix::from_column_slice(v.len(), 1, &v);
        let fast = hankel_matvec(&x, &v, &shape).unwrap();
        prop_assert!(dist(&fast, dense.as_slice()) <= 1e-10 * (1.0 + dense.norm()));
    }

    #[test]
    fn left_inverse_is_exact(levels in shape_strategy(), seed in any::<u64>()) {
        let lv: Vec<Level> = levels.iter().map(|&(n, p)| Level::new(n, p, n + 1 - p).unwrap()).collect();
        let shape = HankelShape::new(lv).unwrap();
        let x = cvec(shape.len(), &mut rng(seed));
        let back = hankel_left_inverse_dense(&hankel_embed(&x, &shape).unwrap(), &shape).unwrap();
        prop_assert!(dist(&back, &x) <= 1e-12 * norm(&x).max(1e-300));
    }
}
