use std::time::Instant;

use num_complex::Complex64;

use super::iterate::LowRankIterate;
use super::problem::{ObjectiveParts, Problem};
use super::{SolverConfig, StopRule, Variant};
use crate::error::{Error, Result};
use crate::hankel::HankelShape;
use crate::model::{nmse, ObservedData};

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    Tolerance,
    MaxIter,
    RelChange,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::MaxIter => "max_iter",
            Termination::RelChange => "rel_change",
        }
    }
}

/// One completed iteration, or the initial point when `iteration == 0`.
///
/// Fields describing the step refer to the transition from `H_{k-1}` through
/// `H_{k-1/2}` to `H_k`; they are `None` on the initial record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// `F(H_k)` and its parts.
    pub objective: Option<ObjectiveParts>,
    /// `F(H_{k-1/2})`, after the subspace projection.
    pub objective_half: Option<f64>,
    /// `||H_{k-1/2} - H_{k-1}||_F^2`.
    pub projection_change_sq: Option<f64>,
    /// `||H_k - H_{k-1/2}||_F`.
    pub step_change: Option<f64>,
    /// Norm of the computable subgradient element at `H_k`.
    pub subgradient_norm: Option<f64>,
    /// `||H_k - H_{k-1}||_F / ||H_{k-1}||_F`.
    pub relative_change: Option<f64>,
    pub iterate_norm: f64,
    pub nmse: Option<f64>,
    pub cg_iterations: Option<usize>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Completed iterations, not counting the initial record.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Mean wall time of the completed iterations.
    pub fn mean_step_seconds(&self) -> f64 {
        let steps = &self.records[self.records.len().min(1)..];
        if steps.is_empty() {
            return 0.0;
        }
        steps.iter().map(|r| r.seconds).sum::<f64>() / steps.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub estimate: Vec<C>,
    pub iterate: LowRankIterate,
    pub trace: SolverTrace,
    pub termination: Termination,
}

/// A failed solve with the trace recorded up to the failure.
#[derive(Debug)]
pub struct SolveFailure {
    pub error: Error,
    pub trace: SolverTrace,
}

impl std::fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.trace.iterations())
    }
}

impl std::error::Error for SolveFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for SolveFailure {
    fn from(error: Error) -> Self {
        SolveFailure {
            error,
            trace: SolverTrace::default(),
        }
    }
}

/// Recovers the signal behind `data`. When `truth` is given, the trace carries
/// the NMSE of every iterate's signal.
pub fn solve(
    data: &ObservedData,
    shape: &HankelShape,
    cfg: &SolverConfig,
    truth: Option<&[C]>,
) -> Result<SolveOutput, SolveFailure> {
    cfg.validate(shape)?;
    if let Some(t) = truth {
        crate::error::check_len("ground truth", shape.len(), t.len())?;
    }
    let problem = Problem::new(shape, data, cfg)?;
    let mut trace = SolverTrace::default();
    let result = match cfg.variant {
        Variant::Lppg | Variant::Mpg => run_proximal(&problem, truth, &mut trace),
        Variant::StandardPg => run_standard(&problem, truth, &mut trace),
    };
    match result {
        Ok((estimate, iterate, termination)) => Ok(SolveOutput {
            estimate,
            iterate,
            trace,
            termination,
        }),
        Err(error) => Err(SolveFailure { error, trace }),
    }
}

fn score(truth: Option<&[C]>, x: &[C]) -> Option<f64> {
    truth.and_then(|t| nmse(x, t).ok())
}

fn relative(num_sq: f64, den: f64) -> f64 {
    if den > 0.0 {
        num_sq.sqrt() / den
    } else if num_sq == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn run_proximal(
    problem: &Problem,
    truth: Option<&[C]>,
    trace: &mut SolverTrace,
) -> Result<(Vec<C>, LowRankIterate, Termination)> {
    let cfg = problem.config();
    let track = cfg.track_objective;
    let start = Instant::now();
    let mut h = problem.initial_iterate()?;
    let mut eval = problem.evaluate(&h, track)?;
    trace.records.push(TraceRecord {
        iteration: 0,
        objective: eval.objective,
        iterate_norm: h.frobenius_norm(),
        nmse: score(truth, &eval.x_star),
        seconds: start.elapsed().as_secs_f64(),
        ..TraceRecord::default()
    });

    for k in 0..cfg.max_iter {
        let t0 = Instant::now();
        let mut rec = TraceRecord {
            iteration: k + 1,
            ..TraceRecord::default()
        };
        let (half, half_eval) = if cfg.variant == Variant::Lppg {
            let (half, report) = problem.subspace_projection(&h)?;
            rec.cg_iterations = Some(report.cg_iterations);
            rec.projection_change_sq = Some(half.distance_sq(&h));
            let e = problem.evaluate(&half, track)?;
            rec.objective_half = e.objective.map(|o| o.total);
            (half, e)
        } else {
            rec.projection_change_sq = Some(0.0);
            rec.objective_half = eval.objective.map(|o| o.total);
            (h.clone(), eval)
        };
        let next = problem.mpg_step_with(&half, &half_eval.x_star, cfg.seed.wrapping_add(k as u64 + 1))?;
        let next_eval = problem.evaluate(&next, track)?;
        let gap_sq = half.distance_sq(&next);
        let sub = problem.subgradient_from_adjoints(&half_eval.adjoint, &next_eval.adjoint, gap_sq);
        let rel = relative(next.distance_sq(&h), h.frobenius_norm());

        rec.objective = next_eval.objective;
        rec.step_change = Some(gap_sq.sqrt());
        rec.subgradient_norm = Some(sub.norm);
        rec.relative_change = Some(rel);
        rec.iterate_norm = next.frobenius_norm();
        rec.nmse = score(truth, &next_eval.x_star);
        rec.seconds = t0.elapsed().as_secs_f64();
        trace.records.push(rec);

        let stop = match cfg.stop {
            StopRule::Subgradient => (sub.norm < cfg.epsilon * next.frobenius_norm()).then_some(Termination::Tolerance),
            StopRule::RelativeChange(tol) => (rel < tol).then_some(Termination::RelChange),
        };
        h = next;
        eval = next_eval;
        if let Some(reason) = stop {
            return Ok((eval.x_star, h, reason));
        }
    }
    Ok((eval.x_star, h, Termination::MaxIter))
}

/// Joint proximal gradient on `(H, x)`; the estimate is the signal variable.
fn run_standard(
    problem: &Problem,
    truth: Option<&[C]>,
    trace: &mut SolverTrace,
) -> Result<(Vec<C>, LowRankIterate, Termination)> {
    let cfg = problem.config();
    let track = cfg.track_objective;
    let gamma = problem.step_size();
    let (beta, alpha) = (cfg.beta, cfg.alpha);
    let samples = problem.samples();
    let weights = problem.weights();
    let start = Instant::now();

    let mut h = problem.initial_iterate()?;
    let mut y = problem.adjoint(&h)?;
    let mut x: Vec<C> = samples.to_vec();
    let joint = |it: &LowRankIterate, x: &[C], y: &[C]| -> Option<ObjectiveParts> {
        track.then(|| problem.joint_objective(it, x, y))
    };
    trace.records.push(TraceRecord {
        iteration: 0,
        objective: joint(&h, &x, &y),
        iterate_norm: h.frobenius_norm(),
        nmse: score(truth, &x),
        seconds: start.elapsed().as_secs_f64(),
        ..TraceRecord::default()
    });

    for k in 0..cfg.max_iter {
        let t0 = Instant::now();
        let gb = gamma * beta;
        let next = problem.truncate(
            &x,
            gb,
            Some((h.left() * C::new(1.0 - gb, 0.0), &h.v)),
            cfg.seed.wrapping_add(k as u64 + 1),
        )?;
        // Gradient in x: P^*(P x - s) + beta (W x - H^* H) + alpha x. `samples`
        // vanish off the mask, so the data part is `1_Omega x - s`.
        let x_next: Vec<C> = x
            .iter()
            .zip(samples)
            .zip(&y)
            .zip(weights)
            .zip(problem.observed())
            .map(|((((xi, si), yi), wi), &observed)| {
                let data = if observed { xi - si } else { C::new(0.0, 0.0) };
                let g = data + (xi * *wi - yi) * beta + xi * alpha;
                xi - g * gamma
            })
            .collect();
        let y_next = problem.adjoint(&next)?;
        let dh = next.distance_sq(&h);
        let dx: f64 = x_next.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum();
        let mapping = (dh + dx).sqrt() / gamma;
        let rel = relative(dh, h.frobenius_norm());

        trace.records.push(TraceRecord {
            iteration: k + 1,
            objective: joint(&next, &x_next, &y_next),
            step_change: Some(dh.sqrt()),
            subgradient_norm: Some(mapping),
            relative_change: Some(rel),
            iterate_norm: next.frobenius_norm(),
            nmse: score(truth, &x_next),
            seconds: t0.elapsed().as_secs_f64(),
            ..TraceRecord::default()
        });
        let stop = match cfg.stop {
            StopRule::Subgradient => (mapping < cfg.epsilon * next.frobenius_norm()).then_some(Termination::Tolerance),
            StopRule::RelativeChange(tol) => (rel < tol).then_some(Termination::RelChange),
        };
        h = next;
        y = y_next;
        x = x_next;
        if let Some(reason) = stop {
            return Ok((x, h, reason));
        }
    }
    Ok((x, h, Termination::MaxIter))
}
