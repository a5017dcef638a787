//! Expands a config into independent solver runs and executes them on the
//! rayon pool. Every run's inputs derive from the base seed and the run's own
//! grid coordinates, so results do not depend on scheduling.

use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use lppg_core::model::{add_noise, generate_signal, nmse, sample_uniform, trial_seed, ObservedData, Stream};
use lppg_core::solver::{solve, SolverConfig, Variant};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::PartialSink;
use crate::CliError;

/// One solver run, as written to `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub variant: String,
    pub dims: String,
    pub rank: usize,
    pub sampling_ratio: f64,
    pub beta_multiplier: f64,
    pub beta: f64,
    pub noise_level: f64,
    pub damped: bool,
    pub trial: usize,
    pub trial_seed: u64,
    pub nmse: f64,
    pub iterations: usize,
    pub termination: String,
}

/// Wall-clock data for one run; kept apart from `ResultRow` so `results.csv`
/// stays reproducible byte for byte.
#[derive(Clone, Debug, Serialize)]
pub struct TimingRow {
    pub variant: String,
    pub dims: String,
    pub rank: usize,
    pub sampling_ratio: f64,
    pub beta_multiplier: f64,
    pub trial: usize,
    pub seconds: f64,
    pub mean_step_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub row: ResultRow,
    pub timing: TimingRow,
    /// NMSE after each iteration, starting from the initial point.
    pub curve: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct RunFailure {
    pub variant: String,
    pub dims: String,
    pub rank: usize,
    pub trial: usize,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    /// In job order, independent of completion order.
    pub runs: Vec<RunOutcome>,
    pub failures: Vec<RunFailure>,
}

impl ExperimentOutput {
    pub fn rows(&self) -> Vec<&ResultRow> {
        self.runs.iter().map(|r| &r.row).collect()
    }
}

#[derive(Clone, Debug)]
struct Job {
    dims: Vec<usize>,
    rank: usize,
    sampling_ratio: f64,
    trial: usize,
    variant: Variant,
    /// `None` when the variant's beta is fixed by `beta_override`.
    multiplier: Option<f64>,
}

pub fn dims_label(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
}

/// FNV-1a over the cell coordinates, so a cell's instances do not move when
/// the grid around it changes.
fn cell_key(dims: &[usize], rank: usize, sampling_ratio: f64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(dims.len() as u64);
    for &d in dims {
        eat(d as u64);
    }
    eat(rank as u64);
    eat(sampling_ratio.to_bits());
    h
}

/// Seed for one stream of one trial in the cell `(dims, rank, Sp)`.
pub fn instance_seed(base: u64, dims: &[usize], rank: usize, sampling_ratio: f64, trial: usize, stream: Stream) -> u64 {
    trial_seed(base ^ cell_key(dims, rank, sampling_ratio), trial as u64, stream)
}

fn expand(cfg: &ExperimentConfig) -> Result<Vec<Job>, CliError> {
    let variants = cfg.parsed_variants()?;
    let mut jobs = Vec::new();
    for dims in &cfg.dims {
        for &rank in &cfg.ranks {
            for &sampling_ratio in &cfg.sampling_ratios {
                for trial in 0..cfg.trials {
                    for &variant in &variants {
                        let job = |multiplier| Job {
                            dims: dims.clone(),
                            rank,
                            sampling_ratio,
                            trial,
                            variant,
                            multiplier,
                        };
                        if cfg.beta_override.contains_key(variant.name()) {
                            jobs.push(job(None));
                        } else {
                            jobs.extend(cfg.beta_multipliers.iter().map(|&m| job(Some(m))));
                        }
                    }
                }
            }
        }
    }
    Ok(jobs)
}

fn override_for(cfg: &ExperimentConfig, variant: Variant) -> Option<f64> {
    cfg.beta_override
        .iter()
        .find(|(k, _)| k.parse::<Variant>().ok() == Some(variant))
        .map(|(_, &b)| b)
}

fn run_job(cfg: &ExperimentConfig, job: &Job) -> Result<RunOutcome, RunFailure> {
    let fail = |message: String| RunFailure {
        variant: job.variant.name().to_string(),
        dims: dims_label(&job.dims),
        rank: job.rank,
        trial: job.trial,
        message,
    };
    let seed = |stream| instance_seed(cfg.seed, &job.dims, job.rank, job.sampling_ratio, job.trial, stream);
    let shape = cfg.shape_for(&job.dims).map_err(|e| fail(e.to_string()))?;
    let signal_seed = seed(Stream::Signal);
    let (truth, _) = generate_signal(&job.dims, job.rank, cfg.damped, signal_seed).map_err(|e| fail(e.to_string()))?;
    let mask = sample_uniform(shape.len(), job.sampling_ratio, seed(Stream::Mask)).map_err(|e| fail(e.to_string()))?;
    let clean = ObservedData::observe(&truth, mask).map_err(|e| fail(e.to_string()))?;
    let data = add_noise(&clean, cfg.noise_level, seed(Stream::Noise)).map_err(|e| fail(e.to_string()))?;

    let beta_star = SolverConfig::default_beta(&shape, &data.mask);
    let (beta, multiplier) = match job.multiplier {
        Some(m) => (m * beta_star, m),
        None => {
            let b = override_for(cfg, job.variant).expect("override present for job");
            (b, b / beta_star)
        }
    };
    let solver_cfg = SolverConfig {
        alpha: cfg.solver.alpha,
        gamma: cfg.solver.gamma,
        epsilon: cfg.solver.epsilon,
        max_iter: cfg.solver.max_iter,
        stop: cfg.solver.stop_rule(),
        seed: seed(Stream::Solver),
        ..SolverConfig::new(job.rank, beta).with_variant(job.variant)
    };

    let start = Instant::now();
    let out = solve(&data, &shape, &solver_cfg, Some(&truth)).map_err(|e| fail(e.to_string()))?;
    let seconds = start.elapsed().as_secs_f64();
    let err = nmse(&out.estimate, &truth).map_err(|e| fail(e.to_string()))?;
    let curve = cfg
        .record_curves
        .then(|| out.trace.records.iter().map(|r| r.nmse.unwrap_or(f64::NAN)).collect());
    let dims = dims_label(&job.dims);
    Ok(RunOutcome {
        row: ResultRow {
            experiment: cfg.name.clone(),
            variant: job.variant.name().to_string(),
            dims: dims.clone(),
            rank: job.rank,
            sampling_ratio: job.sampling_ratio,
            beta_multiplier: multiplier,
            beta,
            noise_level: cfg.noise_level,
            damped: cfg.damped,
            trial: job.trial,
            trial_seed: signal_seed,
            nmse: err,
            iterations: out.trace.iterations(),
            termination: out.termination.name().to_string(),
        },
        timing: TimingRow {
            variant: job.variant.name().to_string(),
            dims,
            rank: job.rank,
            sampling_ratio: job.sampling_ratio,
            beta_multiplier: multiplier,
            trial: job.trial,
            seconds,
            mean_step_seconds: out.trace.mean_step_seconds(),
        },
        curve,
    })
}

/// Runs every job of `cfg`. When `partial` is given, each finished row is
/// appended there as soon as it completes, so an interrupted study keeps its
/// finished runs.
pub fn run_experiment(cfg: &ExperimentConfig, partial: Option<&Path>) -> Result<ExperimentOutput, CliError> {
    cfg.validate()?;
    let jobs = expand(cfg)?;
    log::info!("{}: {} runs", cfg.name, jobs.len());
    let sink = partial.map(PartialSink::create).transpose()?.map(Mutex::new);
    let results: Vec<Result<RunOutcome, RunFailure>> = jobs
        .par_iter()
        .map(|job| {
            let res = run_job(cfg, job);
            match (&res, &sink) {
                (Ok(run), Some(sink)) => {
                    if let Err(e) = sink.lock().expect("sink lock").append(&run.row) {
                        log::warn!("partial results sink: {e}");
                    }
                }
                (Err(f), _) => log::warn!("{} {} r={} trial {}: {}", f.variant, f.dims, f.rank, f.trial, f.message),
                _ => {}
            }
            res
        })
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(f) => failures.push(f),
        }
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        runs,
        failures,
    })
}
