//! Low-rank proximal gradient recovery of a signal from partial samples.
//!
//! The matrix variable `H` is kept as a rank-`r` factorization. The signal is
//! eliminated in closed form, `x*(H) = L (P_Omega^* s + beta H^* H)` with the
//! diagonal `L = (alpha + 1_Omega + beta w)^{-1}`, leaving a single-variable
//! objective `F(H) = f(H)` on rank-`r` matrices.

mod iterate;
mod problem;
mod run;

pub use iterate::LowRankIterate;
pub use problem::{
    resolvent, DiagonalResolvent, Evaluation, Gradient, ObjectiveParts, Problem, ProjectionReport, Subgradient,
};
pub use run::{solve, SolveFailure, SolveOutput, SolverTrace, Termination, TraceRecord};

use crate::error::{Error, Result};
use crate::hankel::HankelShape;
use crate::model::SampleMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Subspace projection followed by a modified PG step.
    Lppg,
    /// Modified PG steps only.
    Mpg,
    /// Joint PG on `(H, x)` with the small global step size.
    StandardPg,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Lppg => "lppg",
            Variant::Mpg => "mpg",
            Variant::StandardPg => "pg",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lppg" => Ok(Variant::Lppg),
            "mpg" => Ok(Variant::Mpg),
            "pg" | "standard_pg" | "standardpg" => Ok(Variant::StandardPg),
            other => Err(Error::Parameter(format!("unknown solver variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// `||dF(H_{k+1})||_F < eps ||H_{k+1}||_F`.
    Subgradient,
    /// `||H_{k+1} - H_k||_F < tol ||H_k||_F`.
    RelativeChange(f64),
}

/// How the Hankel misfit `||H - H(x)||_F^2` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MisfitEval {
    /// Streams the `P x Q` difference column by column; accurate near zero.
    Exact,
    /// Expands the square in `O(N)`; loses relative accuracy once the misfit is tiny.
    Expanded,
    /// `Exact` while `P * Q * r` stays below two million cells, else `Expanded`.
    Auto,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub rank: usize,
    pub beta: f64,
    pub alpha: f64,
    /// `None` picks `1/beta`, or the global Lipschitz step for `StandardPg`.
    pub gamma: Option<f64>,
    pub epsilon: f64,
    pub max_iter: usize,
    pub variant: Variant,
    pub stop: StopRule,
    /// Record `F` and its parts each iteration.
    pub track_objective: bool,
    pub misfit: MisfitEval,
    pub lanczos_tol: f64,
    pub cg_tol: f64,
    /// Seeds the Lanczos start vectors.
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(rank: usize, beta: f64) -> Self {
        SolverConfig {
            rank,
            beta,
            alpha: 1e-20,
            gamma: None,
            epsilon: 1e-6,
            max_iter: 1000,
            variant: Variant::Lppg,
            stop: StopRule::Subgradient,
            track_objective: true,
            misfit: MisfitEval::Auto,
            lanczos_tol: 1e-12,
            cg_tol: 1e-12,
            seed: 0,
        }
    }

    /// `Sp * N / (P * Q)`.
    pub fn default_beta(shape: &HankelShape, mask: &SampleMask) -> f64 {
        mask.ratio() * shape.len() as f64 / (shape.rows() as f64 * shape.cols() as f64)
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Step size in effect for `shape`.
    pub fn step_size(&self, shape: &HankelShape) -> f64 {
        match (self.gamma, self.variant) {
            (Some(g), _) => g,
            (None, Variant::StandardPg) => {
                1.0 / (1.0 + self.beta * shape.rows().min(shape.cols()) as f64 + self.alpha)
            }
            (None, _) => 1.0 / self.beta,
        }
    }

    pub fn validate(&self, shape: &HankelShape) -> Result<()> {
        let full = shape.rows().min(shape.cols());
        if self.rank == 0 || self.rank > full {
            return Err(Error::Parameter(format!("rank {} must lie in 1..={full}", self.rank)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta = {} must be positive", self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Parameter("epsilon must be nonnegative".into()));
        }
        if let StopRule::RelativeChange(t) = self.stop {
            if !(t >= 0.0) {
                return Err(Error::Parameter("relative-change tolerance must be nonnegative".into()));
            }
        }
        let gamma = self.step_size(shape);
        let limit = match self.variant {
            Variant::Lppg | Variant::Mpg => 1.0 / self.beta,
            Variant::StandardPg => 1.0 / (1.0 + self.beta * full as f64 + self.alpha),
        };
        if !(gamma > 0.0 && gamma <= limit * (1.0 + 1e-12)) {
            return Err(Error::Parameter(format!(
                "step size {gamma} outside (0, {limit}] for {}",
                self.variant
            )));
        }
        Ok(())
    }
}
