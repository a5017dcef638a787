//! Multilevel Hankel operators.
//!
//! A signal `x` with dims `(n_1, ..., n_d)` is stored column-major with level 1
//! fastest. Its multilevel Hankel matrix has `P = prod p_l` rows and
//! `Q = prod q_l` columns, where row `u = u_1 + u_2 p_1 + ...` and column
//! `v = v_1 + v_2 q_1 + ...` hold `x[u_1 + v_1, u_2 + v_2, ...]`.
//!
//! Every product against the Hankel matrix is a cyclic convolution on a grid
//! of length `>= n_l` per level, so none of the routines here ever forms the
//! `P x Q` matrix. [`hankel_embed`] does, and is meant for oracles only.

use std::cell::Cell;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::fft::{next_fast_len, FftGrid};
use crate::operator::LinearOperator;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// One level of the Hankel lift: a length-`n` axis split as `p + q = n + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Level {
    pub n: usize,
    pub p: usize,
    pub q: usize,
}

impl Level {
    pub fn new(n: usize, p: usize, q: usize) -> Result<Self> {
        if n == 0 || p == 0 || q == 0 {
            return Err(Error::Shape(format!(
                "level ({n}, {p}, {q}) has a zero extent"
            )));
        }
        if p + q != n + 1 {
            return Err(Error::Shape(format!(
                "level ({n}, {p}, {q}) violates p + q = n + 1"
            )));
        }
        Ok(Level { n, p, q })
    }

    /// Default split `p = ceil((n + 1) / 2)`, `q = n + 1 - p`.
    pub fn balanced(n: usize) -> Result<Self> {
        let p = (n + 2) / 2;
        Level::new(n, p, (n + 1).saturating_sub(p))
    }

    /// Number of cells on anti-diagonal `a` of a `p x q` matrix.
    fn weight(&self, a: usize) -> usize {
        (a + 1).min(self.p).min(self.q).min(self.n - a)
    }
}

/// Geometry of a level-d Hankel lift.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HankelShape {
    levels: Vec<Level>,
}

impl HankelShape {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Shape("at least one level is required".into()));
        }
        for l in &levels {
            Level::new(l.n, l.p, l.q)?;
        }
        Ok(HankelShape { levels })
    }

    /// Balanced split on every level.
    pub fn balanced(dims: &[usize]) -> Result<Self> {
        HankelShape::new(
            dims.iter()
                .map(|&n| Level::balanced(n))
                .collect::<Result<_>>()?,
        )
    }

    pub fn one_d(n: usize, p: usize) -> Result<Self> {
        HankelShape::new(vec![Level::new(n, p, (n + 1).saturating_sub(p))?])
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.n).collect()
    }

    /// `P`.
    pub fn rows(&self) -> usize {
        self.levels.iter().map(|l| l.p).product()
    }

    /// `Q`.
    pub fn cols(&self) -> usize {
        self.levels.iter().map(|l| l.q).product()
    }

    /// `N`.
    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn signal_strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.depth());
        let mut acc = 1;
        for l in &self.levels {
            s.push(acc);
            acc *= l.n;
        }
        s
    }

    /// Signal offset contributed by each row index `u`.
    pub fn row_offsets(&self) -> Vec<usize> {
        let dims: Vec<usize> = self.levels.iter().map(|l| l.p).collect();
        index_offsets(&dims, &self.signal_strides(), None, false)
    }

    /// Signal offset contributed by each column index `v`.
    pub fn col_offsets(&self) -> Vec<usize> {
        let dims: Vec<usize> = self.levels.iter().map(|l| l.q).collect();
        index_offsets(&dims, &self.signal_strides(), None, false)
    }

    /// Linear signal index stored at matrix cell `(u, v)`.
    pub fn signal_index(&self, u: usize, v: usize) -> usize {
        let (mut u, mut v) = (u, v);
        let mut idx = 0;
        let mut stride = 1;
        for l in &self.levels {
            idx += ((u % l.p) + (v % l.q)) * stride;
            u /= l.p;
            v /= l.q;
            stride *= l.n;
        }
        idx
    }

    /// Multiplicity of each signal entry in the Hankel matrix.
    pub fn weights(&self) -> WeightDiagonal {
        let mut w = vec![1usize; 1];
        for l in &self.levels {
            let level: Vec<usize> = (0..l.n).map(|a| l.weight(a)).collect();
            let mut next = Vec::with_capacity(w.len() * l.n);
            for &b in &level {
                next.extend(w.iter().map(|&a| a * b));
            }
            w = next;
        }
        WeightDiagonal(w)
    }
}

/// Column-major walk over `dims`, returning `sum_l (shift_l + i_l) * strides_l`
/// (or `dims_l - 1 - i_l` when `reverse`).
fn index_offsets(
    dims: &[usize],
    strides: &[usize],
    shift: Option<&[usize]>,
    reverse: bool,
) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        let mut off = 0;
        for l in 0..dims.len() {
            let i = if reverse { dims[l] - 1 - idx[l] } else { idx[l] };
            let s = shift.map_or(0, |s| s[l]);
            off += (i + s) * strides[l];
        }
        out.push(off);
        for l in 0..dims.len() {
            idx[l] += 1;
            if idx[l] < dims[l] {
                break;
            }
            idx[l] = 0;
        }
    }
    out
}

/// `w = diag(H* H)`: per-entry multiplicity of the signal in its Hankel lift.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightDiagonal(Vec<usize>);

impl WeightDiagonal {
    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&w| w as f64).collect()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

pub fn hankel_weights(shape: &HankelShape) -> WeightDiagonal {
    shape.weights()
}

// ---------------------------------------------------------------------------
// Dense oracle path and its guard.

const DEFAULT_DENSE_LIMIT: usize = 4096;

static DENSE_LIMIT: AtomicUsize = AtomicUsize::new(DEFAULT_DENSE_LIMIT);

thread_local! {
    static DENSE_COUNT: Cell<usize> = const { Cell::new(0) };
}

/// Largest signal length for which a dense `P x Q` embedding is allowed.
pub fn dense_limit() -> usize {
    DENSE_LIMIT.load(Ordering::Relaxed)
}

pub fn set_dense_limit(limit: usize) {
    DENSE_LIMIT.store(limit, Ordering::Relaxed);
}

/// Number of dense `P x Q` matrices materialized on the current thread.
pub fn dense_materializations() -> usize {
    DENSE_COUNT.with(|c| c.get())
}

pub(crate) fn guard_dense(shape: &HankelShape) -> Result<()> {
    let limit = dense_limit();
    if shape.len() > limit {
        return Err(Error::DenseLimit {
            len: shape.len(),
            limit,
        });
    }
    DENSE_COUNT.with(|c| c.set(c.get() + 1));
    Ok(())
}

/// Dense `P x Q` Hankel matrix of `x`. Refuses signals longer than [`dense_limit`].
pub fn hankel_embed(x: &[C], shape: &HankelShape) -> Result<DMatrix<C>> {
    check_len("hankel_embed signal", shape.len(), x.len())?;
    guard_dense(shape)?;
    let rows = shape.row_offsets();
    let cols = shape.col_offsets();
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |u, v| {
        x[rows[u] + cols[v]]
    }))
}

/// `H* M`: sums each (multilevel) anti-diagonal of a dense matrix.
pub fn hankel_adjoint_dense(m: &DMatrix<C>, shape: &HankelShape) -> Result<Vec<C>> {
    check_len("hankel_adjoint rows", shape.rows(), m.nrows())?;
    check_len("hankel_adjoint cols", shape.cols(), m.ncols())?;
    let rows = shape.row_offsets();
    let cols = shape.col_offsets();
    let mut out = vec![ZERO; shape.len()];
    for (v, &cv) in cols.iter().enumerate() {
        for (u, &ru) in rows.iter().enumerate() {
            out[ru + cv] += m[(u, v)];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// FFT path.

/// Precomputed FFT grid and index maps for one [`HankelShape`].
///
/// All methods take `&self` and allocate their own work buffers, so a plan can
/// be shared between threads.
#[derive(Clone, Debug)]
pub struct HankelPlan {
    shape: HankelShape,
    grid: FftGrid,
    signal_at: Vec<usize>,
    row_at: Vec<usize>,
    row_rev_at: Vec<usize>,
    col_at: Vec<usize>,
    col_rev_at: Vec<usize>,
    matvec_read: Vec<usize>,
    rmatvec_read: Vec<usize>,
}

/// FFT of a zero-padded signal, reusable across products with the same `H(x)`.
#[derive(Clone, Debug)]
pub struct SignalSpectrum(Vec<C>);

impl HankelPlan {
    pub fn new(shape: &HankelShape) -> Self {
        let lv = shape.levels();
        let gdims: Vec<usize> = lv.iter().map(|l| next_fast_len(l.n)).collect();
        let grid = FftGrid::new(&gdims);
        let gs = grid.strides().to_vec();
        let n: Vec<usize> = lv.iter().map(|l| l.n).collect();
        let p: Vec<usize> = lv.iter().map(|l| l.p).collect();
        let q: Vec<usize> = lv.iter().map(|l| l.q).collect();
        let q_shift: Vec<usize> = q.iter().map(|&q| q - 1).collect();
        let p_shift: Vec<usize> = p.iter().map(|&p| p - 1).collect();
        HankelPlan {
            shape: shape.clone(),
            signal_at: index_offsets(&n, &gs, None, false),
            row_at: index_offsets(&p, &gs, None, false),
            row_rev_at: index_offsets(&p, &gs, None, true),
            col_at: index_offsets(&q, &gs, None, false),
            col_rev_at: index_offsets(&q, &gs, None, true),
            matvec_read: index_offsets(&p, &gs, Some(&q_shift), false),
            rmatvec_read: index_offsets(&q, &gs, Some(&p_shift), false),
            grid,
        }
    }

    pub fn shape(&self) -> &HankelShape {
        &self.shape
    }

    pub fn spectrum(&self, x: &[C]) -> Result<SignalSpectrum> {
        check_len("signal", self.shape.len(), x.len())?;
        Ok(SignalSpectrum(self.transform_scattered(x, &self.signal_at)))
    }

    fn transform_scattered(&self, values: &[C], at: &[usize]) -> Vec<C> {
        let mut buf = self.grid.zeros();
        for (&i, &z) in at.iter().zip(values) {
            buf[i] = z;
        }
        self.grid.forward(&mut buf);
        buf
    }

    /// `H(x) v`.
    pub fn matvec(&self, xs: &SignalSpectrum, v: &[C]) -> Result<Vec<C>> {
        check_len("hankel_matvec input", self.shape.cols(), v.len())?;
        let mut buf = self.transform_scattered(v, &self.col_rev_at);
        for (b, s) in buf.iter_mut().zip(&xs.0) {
            *b *= s;
        }
        self.grid.inverse(&mut buf);
        Ok(self.matvec_read.iter().map(|&i| buf[i]).collect())
    }

    /// `H(x)^H u`.
    pub fn rmatvec(&self, xs: &SignalSpectrum, u: &[C]) -> Result<Vec<C>> {
        check_len("hankel_rmatvec input", self.shape.rows(), u.len())?;
        let conj: Vec<C> = u.iter().map(|z| z.conj()).collect();
        let mut buf = self.transform_scattered(&conj, &self.row_rev_at);
        for (b, s) in buf.iter_mut().zip(&xs.0) {
            *b *= s;
        }
        self.grid.inverse(&mut buf);
        Ok(self.rmatvec_read.iter().map(|&i| buf[i].conj()).collect())
    }

    fn check_factors(&self, left: &DMatrix<C>, right: &DMatrix<C>) -> Result<()> {
        check_len("left factor rows", self.shape.rows(), left.nrows())?;
        check_len("right factor rows", self.shape.cols(), right.nrows())?;
        check_len("factor rank", left.ncols(), right.ncols())
    }

    fn left_spectra(&self, left: &DMatrix<C>) -> Vec<Vec<C>> {
        left.column_iter()
            .map(|c| self.transform_scattered(c.as_slice(), &self.row_at))
            .collect()
    }

    fn right_spectra(&self, right: &DMatrix<C>) -> Vec<Vec<C>> {
        right
            .column_iter()
            .map(|c| {
                let conj: Vec<C> = c.iter().map(|z| z.conj()).collect();
                self.transform_scattered(&conj, &self.col_at)
            })
            .collect()
    }

    fn read_signal(&self, buf: &[C]) -> Vec<C> {
        self.signal_at.iter().map(|&i| buf[i]).collect()
    }

    /// `H*(left right^H) = sum_i H*(left[:, i] right[:, i]^H)`, one convolution per column.
    pub fn adjoint_lowrank(&self, left: &DMatrix<C>, right: &DMatrix<C>) -> Result<Vec<C>> {
        self.check_factors(left, right)?;
        let mut acc = self.grid.zeros();
        for (a, b) in self.left_spectra(left).iter().zip(self.right_spectra(right)) {
            for ((z, x), y) in acc.iter_mut().zip(a).zip(&b) {
                *z += x * y;
            }
        }
        self.grid.inverse(&mut acc);
        Ok(self.read_signal(&acc))
    }

    /// `H*(left[:, i] right[:, j]^H)` for every pair, ordered `i + j * r`
    /// (column-major over an `r x r` core).
    pub fn adjoint_pairs(&self, left: &DMatrix<C>, right: &DMatrix<C>) -> Result<Vec<Vec<C>>> {
        self.check_factors(left, right)?;
        let ls = self.left_spectra(left);
        let rs = self.right_spectra(right);
        let mut out = Vec::with_capacity(ls.len() * rs.len());
        for b in &rs {
            for a in &ls {
                let mut buf: Vec<C> = a.iter().zip(b).map(|(x, y)| x * y).collect();
                self.grid.inverse(&mut buf);
                out.push(self.read_signal(&buf));
            }
        }
        Ok(out)
    }
}

/// `H(x) v` via FFT.
pub fn hankel_matvec(x: &[C], v: &[C], shape: &HankelShape) -> Result<Vec<C>> {
    let plan = HankelPlan::new(shape);
    plan.matvec(&plan.spectrum(x)?, v)
}

/// `H(x)^H u` via FFT.
pub fn hankel_rmatvec(x: &[C], u: &[C], shape: &HankelShape) -> Result<Vec<C>> {
    let plan = HankelPlan::new(shape);
    plan.rmatvec(&plan.spectrum(x)?, u)
}

/// `H*(U_hat V^H)` via FFT correlations.
pub fn hankel_adjoint_lowrank(u_hat: &DMatrix<C>, v: &DMatrix<C>, shape: &HankelShape) -> Result<Vec<C>> {
    HankelPlan::new(shape).adjoint_lowrank(u_hat, v)
}

/// `S = W^{-1} H*` applied to a factored matrix `U_hat V^H`.
pub fn hankel_left_inverse(u_hat: &DMatrix<C>, v: &DMatrix<C>, shape: &HankelShape) -> Result<Vec<C>> {
    let mut y = hankel_adjoint_lowrank(u_hat, v, shape)?;
    divide_by_weights(&mut y, &shape.weights());
    Ok(y)
}

/// `S = W^{-1} H*` applied to a dense matrix.
pub fn hankel_left_inverse_dense(m: &DMatrix<C>, shape: &HankelShape) -> Result<Vec<C>> {
    let mut y = hankel_adjoint_dense(m, shape)?;
    divide_by_weights(&mut y, &shape.weights());
    Ok(y)
}

fn divide_by_weights(y: &mut [C], w: &WeightDiagonal) {
    for (z, &wa) in y.iter_mut().zip(w.values()) {
        *z /= wa as f64;
    }
}

/// `H(x)` as a matrix-free operator.
pub struct HankelOperator<'a> {
    plan: &'a HankelPlan,
    spectrum: SignalSpectrum,
}

impl<'a> HankelOperator<'a> {
    pub fn new(plan: &'a HankelPlan, x: &[C]) -> Result<Self> {
        Ok(HankelOperator {
            spectrum: plan.spectrum(x)?,
            plan,
        })
    }
}

impl LinearOperator for HankelOperator<'_> {
    fn rows(&self) -> usize {
        self.plan.shape.rows()
    }

    fn cols(&self) -> usize {
        self.plan.shape.cols()
    }

    fn apply(&self, x: &[C]) -> Vec<C> {
        self.plan
            .matvec(&self.spectrum, x)
            .expect("operator input length")
    }

    fn apply_adjoint(&self, y: &[C]) -> Vec<C> {
        self.plan
            .rmatvec(&self.spectrum, y)
            .expect("operator input length")
    }
}
