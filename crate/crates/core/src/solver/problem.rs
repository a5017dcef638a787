use nalgebra::DMatrix;
use num_complex::Complex64;

use super::iterate::LowRankIterate;
use super::{MisfitEval, SolverConfig};
use crate::error::{check_len, Error, Result};
use crate::hankel::{hankel_embed, HankelOperator, HankelPlan, HankelShape};
use crate::linalg::{cg_solve_observed, lanczos_truncated_svd, CgOptions, LanczosOptions, TruncatedSvd};
use crate::model::{ObservedData, SampleMask};
use crate::operator::{inner, LinearOperator};

type C = Complex64;

const EXACT_MISFIT_CELLS: usize = 2_000_000;

/// `d[i] = 1 / (alpha + 1_{i in Omega} + beta w[i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalResolvent(Vec<f64>);

impl DiagonalResolvent {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, x: &[C]) -> Vec<C> {
        x.iter().zip(&self.0).map(|(z, d)| z * *d).collect()
    }
}

pub fn resolvent(shape: &HankelShape, mask: &SampleMask, alpha: f64, beta: f64) -> Result<DiagonalResolvent> {
    check_len("mask length", shape.len(), mask.len())?;
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(Error::Parameter("alpha and beta must be nonnegative".into()));
    }
    let observed = mask.indicator();
    let d: Vec<f64> = shape
        .weights()
        .values()
        .iter()
        .zip(&observed)
        .map(|(&w, &o)| 1.0 / (alpha + if o { 1.0 } else { 0.0 } + beta * w as f64))
        .collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter(
            "resolvent is singular: an unobserved entry has alpha + beta w = 0".into(),
        ));
    }
    Ok(DiagonalResolvent(d))
}

/// Terms of `f(H, x) = 1/2 ||s - P x||^2 + beta/2 ||H - H(x)||_F^2 + alpha/2 ||x||^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveParts {
    pub total: f64,
    pub data: f64,
    pub hankel: f64,
    pub regularizer: f64,
}

/// `x*(H)` together with `H^* H` and, optionally, `F(H)`.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub x_star: Vec<C>,
    pub adjoint: Vec<C>,
    pub objective: Option<ObjectiveParts>,
}

/// `grad f(H) = beta (H - H(x*(H)))`, kept as a low-rank part and a Hankel part.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub beta: f64,
    pub x_star: Vec<C>,
    pub iterate: LowRankIterate,
}

impl Gradient {
    /// `Re <grad f, A B^H>` without forming either matrix.
    pub fn inner_lowrank(&self, plan: &HankelPlan, a: &DMatrix<C>, b: &DMatrix<C>) -> Result<f64> {
        let it = &self.iterate;
        let low = (it.sigma.adjoint() * (it.u.adjoint() * a) * (b.adjoint() * &it.v)).trace();
        let hank = inner(&self.x_star, &plan.adjoint_lowrank(a, b)?);
        Ok(self.beta * (low - hank).re)
    }

    /// Dense gradient for small oracle checks.
    pub fn to_dense(&self, shape: &HankelShape) -> Result<DMatrix<C>> {
        let h = self.iterate.to_dense(shape)?;
        Ok((h - hankel_embed(&self.x_star, shape)?) * C::new(self.beta, 0.0))
    }
}

/// The computable subgradient `beta H(v) + c (H_half - H_next)` of `F` at `H_next`,
/// with `v = beta L H^*(H_half - H_next)` and `c = 1/gamma - beta`.
#[derive(Clone, Debug)]
pub struct Subgradient {
    pub v: Vec<C>,
    pub beta: f64,
    pub correction: f64,
    pub norm: f64,
}

impl Subgradient {
    /// Dense element for oracle checks; `half` and `next` must be the iterates it came from.
    pub fn to_dense(&self, shape: &HankelShape, half: &LowRankIterate, next: &LowRankIterate) -> Result<DMatrix<C>> {
        let mut m = hankel_embed(&self.v, shape)? * C::new(self.beta, 0.0);
        if self.correction != 0.0 {
            m += (half.to_dense(shape)? - next.to_dense(shape)?) * C::new(self.correction, 0.0);
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionReport {
    pub cg_iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Precomputed state for one recovery instance: the FFT plan, weights,
/// resolvent and observations.
#[derive(Clone, Debug)]
pub struct Problem {
    shape: HankelShape,
    plan: HankelPlan,
    cfg: SolverConfig,
    weights: Vec<f64>,
    observed: Vec<bool>,
    samples: Vec<C>,
    resolvent: DiagonalResolvent,
    row_off: Vec<usize>,
    col_off: Vec<usize>,
}

/// `scale * H(x)` plus an optional low-rank term `left right^H`.
struct ShiftedHankel<'a> {
    hankel: HankelOperator<'a>,
    low_rank: Option<(DMatrix<C>, &'a DMatrix<C>)>,
}

impl LinearOperator for ShiftedHankel<'_> {
    fn rows(&self) -> usize {
        self.hankel.rows()
    }

    fn cols(&self) -> usize {
        self.hankel.cols()
    }

    fn apply(&self, z: &[C]) -> Vec<C> {
        let mut y = self.hankel.apply(z);
        if let Some((left, right)) = &self.low_rank {
            let coef = right.adjoint() * DMatrix::from_column_slice(z.len(), 1, z);
            let add = left * coef;
            for (a, b) in y.iter_mut().zip(add.iter()) {
                *a += b;
            }
        }
        y
    }

    fn apply_adjoint(&self, z: &[C]) -> Vec<C> {
        let mut y = self.hankel.apply_adjoint(z);
        if let Some((left, right)) = &self.low_rank {
            let coef = left.adjoint() * DMatrix::from_column_slice(z.len(), 1, z);
            let add = *right * coef;
            for (a, b) in y.iter_mut().zip(add.iter()) {
                *a += b;
            }
        }
        y
    }
}

impl Problem {
    pub fn new(shape: &HankelShape, data: &ObservedData, cfg: &SolverConfig) -> Result<Self> {
        check_len("observed data", shape.len(), data.len())?;
        let resolvent = resolvent(shape, &data.mask, cfg.alpha, cfg.beta)?;
        Ok(Problem {
            plan: HankelPlan::new(shape),
            weights: shape.weights().to_f64(),
            observed: data.mask.indicator(),
            samples: data.samples.clone(),
            row_off: shape.row_offsets(),
            col_off: shape.col_offsets(),
            resolvent,
            shape: shape.clone(),
            cfg: cfg.clone(),
        })
    }

    pub fn shape(&self) -> &HankelShape {
        &self.shape
    }

    pub fn plan(&self) -> &HankelPlan {
        &self.plan
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn resolvent(&self) -> &DiagonalResolvent {
        &self.resolvent
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indicator of the observed entries.
    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn samples(&self) -> &[C] {
        &self.samples
    }

    pub fn step_size(&self) -> f64 {
        self.cfg.step_size(&self.shape)
    }

    fn check_iterate(&self, it: &LowRankIterate) -> Result<()> {
        check_len("iterate rows", self.shape.rows(), it.rows())?;
        check_len("iterate columns", self.shape.cols(), it.cols())
    }

    /// `H^*(U Sigma V^H)`.
    pub fn adjoint(&self, it: &LowRankIterate) -> Result<Vec<C>> {
        self.check_iterate(it)?;
        self.plan.adjoint_lowrank(&it.left(), &it.v)
    }

    /// `x* = L (P^* s + beta y)` for `y = H^* H`.
    pub fn x_star_from_adjoint(&self, y: &[C]) -> Vec<C> {
        let beta = self.cfg.beta;
        self.samples
            .iter()
            .zip(y)
            .zip(self.resolvent.values())
            .map(|((s, yi), d)| (s + yi * beta) * *d)
            .collect()
    }

    pub fn x_star(&self, it: &LowRankIterate) -> Result<Vec<C>> {
        Ok(self.x_star_from_adjoint(&self.adjoint(it)?))
    }

    fn use_exact_misfit(&self, rank: usize) -> bool {
        match self.cfg.misfit {
            MisfitEval::Exact => true,
            MisfitEval::Expanded => false,
            MisfitEval::Auto => self.shape.rows() * self.shape.cols() * rank <= EXACT_MISFIT_CELLS,
        }
    }

    /// `||U Sigma V^H - H(x)||_F^2`; `y` must equal `H^*(U Sigma V^H)`.
    pub fn hankel_misfit_sq(&self, it: &LowRankIterate, x: &[C], y: &[C]) -> f64 {
        if self.use_exact_misfit(it.rank()) {
            return self.misfit_streamed(it, x);
        }
        let cross: f64 = y.iter().zip(x).map(|(a, b)| (a.conj() * b).re).sum();
        let wx: f64 = x.iter().zip(&self.weights).map(|(z, w)| w * z.norm_sqr()).sum();
        (it.sigma.norm_squared() - 2.0 * cross + wx).max(0.0)
    }

    fn misfit_streamed(&self, it: &LowRankIterate, x: &[C]) -> f64 {
        let a = it.left();
        let p = self.shape.rows();
        let mut col = vec![C::new(0.0, 0.0); p];
        let mut total = 0.0;
        for (j, &cj) in self.col_off.iter().enumerate() {
            col.fill(C::new(0.0, 0.0));
            for k in 0..it.rank() {
                let c = it.v[(j, k)].conj();
                for (dst, src) in col.iter_mut().zip(a.column(k).iter()) {
                    *dst += src * c;
                }
            }
            for (h, &ri) in col.iter().zip(&self.row_off) {
                total += (h - x[ri + cj]).norm_sqr();
            }
        }
        total
    }

    /// `f(H, x)` for an arbitrary signal `x`; `y` must equal `H^* H`.
    pub fn joint_objective(&self, it: &LowRankIterate, x: &[C], y: &[C]) -> ObjectiveParts {
        let data = 0.5
            * self
                .samples
                .iter()
                .zip(x)
                .zip(&self.observed)
                .filter(|(_, &o)| o)
                .map(|((s, xi), _)| (s - xi).norm_sqr())
                .sum::<f64>();
        let hankel = 0.5 * self.cfg.beta * self.hankel_misfit_sq(it, x, y);
        let regularizer = 0.5 * self.cfg.alpha * x.iter().map(|z| z.norm_sqr()).sum::<f64>();
        ObjectiveParts {
            total: data + hankel + regularizer,
            data,
            hankel,
            regularizer,
        }
    }

    pub fn evaluate(&self, it: &LowRankIterate, with_objective: bool) -> Result<Evaluation> {
        let adjoint = self.adjoint(it)?;
        let x_star = self.x_star_from_adjoint(&adjoint);
        let objective = with_objective.then(|| self.joint_objective(it, &x_star, &adjoint));
        Ok(Evaluation {
            x_star,
            adjoint,
            objective,
        })
    }

    /// `F(H) = f(H, x*(H))`.
    pub fn objective(&self, it: &LowRankIterate) -> Result<ObjectiveParts> {
        Ok(self.evaluate(it, true)?.objective.expect("objective requested"))
    }

    pub fn grad_f(&self, it: &LowRankIterate) -> Result<Gradient> {
        Ok(Gradient {
            beta: self.cfg.beta,
            x_star: self.x_star(it)?,
            iterate: it.clone(),
        })
    }

    fn lanczos_options(&self, seed: u64) -> LanczosOptions {
        let r = self.cfg.rank;
        let basis = (2 * r).max(r + 10);
        LanczosOptions {
            tol: self.cfg.lanczos_tol,
            max_steps: Some(60 * basis),
            basis_size: Some(basis),
            seed,
        }
    }

    /// Rank-`r` truncated SVD of `scale H(x) + left right^H`.
    pub(crate) fn truncate(
        &self,
        x: &[C],
        scale: f64,
        low_rank: Option<(DMatrix<C>, &DMatrix<C>)>,
        seed: u64,
    ) -> Result<LowRankIterate> {
        let scaled: Vec<C> = x.iter().map(|z| z * scale).collect();
        let op = ShiftedHankel {
            hankel: HankelOperator::new(&self.plan, &scaled)?,
            low_rank,
        };
        let svd = match lanczos_truncated_svd(&op, self.cfg.rank, &self.lanczos_options(seed)) {
            Ok(svd) => svd,
            Err(Error::LanczosNoConvergence {
                worst_residual, best, ..
            }) if worst_residual <= 1e-6 => {
                log::debug!("accepting Lanczos triplets with relative residual {worst_residual:e}");
                *best
            }
            Err(e) => return Err(e),
        };
        Ok(LowRankIterate::from_svd(svd))
    }

    /// `H_0 = T_r(H(s))`.
    pub fn initial_iterate(&self) -> Result<LowRankIterate> {
        self.truncate(&self.samples, 1.0, None, self.cfg.seed)
    }

    /// `T_r(H - gamma grad f(H))` given `x = x*(H)`.
    pub fn mpg_step_with(&self, half: &LowRankIterate, x_half: &[C], seed: u64) -> Result<LowRankIterate> {
        self.check_iterate(half)?;
        let gb = self.step_size() * self.cfg.beta;
        let keep = 1.0 - gb;
        let low_rank = (keep.abs() > 1e-12).then(|| (half.left() * C::new(keep, 0.0), &half.v));
        self.truncate(x_half, gb, low_rank, seed)
    }

    pub fn mpg_step(&self, half: &LowRankIterate) -> Result<LowRankIterate> {
        let x = self.x_star(half)?;
        self.mpg_step_with(half, &x, self.cfg.seed)
    }

    /// Minimizes `F(U Sigma V^H)` over the core with `U`, `V` held fixed, by CG on
    /// `Sigma - beta P^*_{U,V} H L H^* P_{U,V} Sigma = P^*_{U,V} H L P^* s`.
    /// CG starts from the current core, so `F` never increases even when the
    /// iteration stops early.
    pub fn subspace_projection(&self, it: &LowRankIterate) -> Result<(LowRankIterate, ProjectionReport)> {
        self.check_iterate(it)?;
        let r = it.rank();
        let beta = self.cfg.beta;
        let cols = self.plan.adjoint_pairs(&it.u, &it.v)?;
        let d = self.resolvent.values();
        let ds = self.resolvent.apply(&self.samples);
        let rhs = DMatrix::from_fn(r, r, |i, j| inner(&cols[i + j * r], &ds));
        let map = |sig: &DMatrix<C>| -> DMatrix<C> {
            let mut y = vec![C::new(0.0, 0.0); d.len()];
            for (c, s) in cols.iter().zip(sig.iter()) {
                if *s != C::new(0.0, 0.0) {
                    for (yi, ci) in y.iter_mut().zip(c) {
                        *yi += ci * s;
                    }
                }
            }
            for (yi, di) in y.iter_mut().zip(d) {
                *yi *= *di;
            }
            sig - DMatrix::from_fn(r, r, |i, j| inner(&cols[i + j * r], &y) * beta)
        };
        let residual = &rhs - map(&it.sigma);
        let opts = CgOptions {
            tol: self.cfg.cg_tol * (rhs.norm() / residual.norm().max(f64::MIN_POSITIVE)).max(1.0),
            max_iter: Some((r * r).max(1)),
            restarts: 2,
        };
        let mut last = DMatrix::<C>::zeros(r, r);
        let mut last_iters = 0;
        let (delta, report) = match cg_solve_observed(&map, &residual, &opts, |k, x| {
            last_iters = k;
            last.copy_from(x);
        }) {
            Ok(rep) => (
                rep.solution,
                ProjectionReport {
                    cg_iterations: rep.iterations,
                    relative_residual: rep.relative_residual,
                    converged: true,
                },
            ),
            Err(Error::CgNoConvergence { iterations, residual }) => (
                last,
                ProjectionReport {
                    cg_iterations: iterations,
                    relative_residual: residual,
                    converged: false,
                },
            ),
            Err(Error::Indefinite { .. }) => (
                last,
                ProjectionReport {
                    cg_iterations: last_iters,
                    relative_residual: f64::NAN,
                    converged: false,
                },
            ),
            Err(e) => return Err(e),
        };
        let projected = LowRankIterate {
            u: it.u.clone(),
            sigma: &it.sigma + delta,
            v: it.v.clone(),
        };
        Ok((projected, report))
    }

    /// Subgradient element at `next` from the adjoints `y_half = H^* H_half`,
    /// `y_next = H^* H_next`; `gap_sq` is `||H_half - H_next||_F^2`.
    pub fn subgradient_from_adjoints(&self, y_half: &[C], y_next: &[C], gap_sq: f64) -> Subgradient {
        let beta = self.cfg.beta;
        let diff: Vec<C> = y_half.iter().zip(y_next).map(|(a, b)| a - b).collect();
        let v: Vec<C> = diff
            .iter()
            .zip(self.resolvent.values())
            .map(|(z, d)| z * (beta * d))
            .collect();
        let mut correction = 1.0 / self.step_size() - beta;
        if correction.abs() <= 1e-12 * beta {
            correction = 0.0;
        }
        let hv: f64 = v
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * z.norm_sqr())
            .sum::<f64>()
            * beta
            * beta;
        let cross = 2.0 * correction * beta * inner(&v, &diff).re;
        let norm = (hv + cross + correction * correction * gap_sq).max(0.0).sqrt();
        Subgradient {
            v,
            beta,
            correction,
            norm,
        }
    }

    pub fn subgradient_element(&self, half: &LowRankIterate, next: &LowRankIterate) -> Result<Subgradient> {
        Ok(self.subgradient_from_adjoints(&self.adjoint(half)?, &self.adjoint(next)?, half.distance_sq(next)))
    }

    /// Largest eigenvalue of `D -> beta D - beta^2 H L H^* D` on Hankel-structured
    /// `D = H(z)`. There `H^* H(z) = w z`, so the map is diagonal in `z` with
    /// eigenvalues `beta (alpha + 1_Omega) / (alpha + 1_Omega + beta w)`.
    pub fn hessian_bound(&self) -> f64 {
        let beta = self.cfg.beta;
        self.weights
            .iter()
            .zip(self.resolvent.values())
            .map(|(w, d)| beta - beta * beta * d * w)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Wraps a finished truncated SVD in an iterate; useful when a caller already has one.
impl From<TruncatedSvd> for LowRankIterate {
    fn from(svd: TruncatedSvd) -> Self {
        LowRankIterate::from_svd(svd)
    }
}
