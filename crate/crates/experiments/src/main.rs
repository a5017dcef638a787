use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lppg_core::solver::{solve, SolverConfig, Variant};
use lppg_experiments::config::{ExperimentConfig, ExperimentKind};
use lppg_experiments::output::{sci, write_atomic, write_outputs};
use lppg_experiments::{input, run_experiment, CliError};

#[derive(Parser)]
#[command(name = "lppg", version, about = "Spectrally sparse signal recovery by low-rank Hankel completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Success fraction over a (Sp, r) grid and the 50% transition curve.
    PhaseTransition(StudyArgs),
    /// Mean NMSE per iteration for each variant.
    Convergence(StudyArgs),
    /// Mean NMSE and iteration counts across beta multipliers under heavy noise.
    NoiseTable(StudyArgs),
    /// Mean NMSE against signal length.
    SizeSweep(StudyArgs),
    /// Recover one signal from a file of observed entries.
    Solve(SolveArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML file merged over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to one solver variant.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// 10 trials instead of the full count.
    #[arg(long)]
    quick: bool,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Use damped components.
    #[arg(long)]
    damped: bool,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Observed entries: `.json`, or CSV with a `# dims:` header.
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    rank: Option<usize>,
    /// Absolute beta; defaults to the configured multiplier times Sp N / (P Q).
    #[arg(long)]
    beta: Option<f64>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: lppg_core::Error| e.to_string())
}

fn load_config(kind: ExperimentKind, quick: bool, common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(kind, quick, path)?,
        None => ExperimentConfig::preset(kind, quick),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    if let Some(v) = common.variant {
        cfg.variants = vec![v.name().to_string()];
    }
    Ok(cfg)
}

fn run_study(kind: ExperimentKind, args: &StudyArgs) -> Result<(), CliError> {
    let mut cfg = load_config(kind, args.quick, &args.common)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if args.damped {
        cfg.damped = true;
    }
    cfg.validate()?;
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let dir = PathBuf::from(&cfg.out_dir);
    let out = run_experiment(&cfg, Some(&dir.join("results.partial.csv")))?;
    write_outputs(&out, &dir)?;
    eprintln!("{} runs written to {}", out.runs.len(), dir.display());
    if !out.failures.is_empty() {
        return Err(CliError::Solver(format!("{} of {} runs failed; see summary.json", out.failures.len(), out.failures.len() + out.runs.len())));
    }
    Ok(())
}

fn run_solve(args: &SolveArgs) -> Result<(), CliError> {
    let mut cfg = load_config(ExperimentKind::Single, false, &args.common)?;
    let file = input::read_signal_file(&args.input)?;
    cfg.dims = vec![file.dims.clone()];
    cfg.rows = file.rows.clone();
    if let Some(r) = args.rank {
        cfg.ranks = vec![r];
    }
    cfg.validate()?;
    let shape = cfg.shape_for(&file.dims)?;
    let variant = cfg.parsed_variants()?[0];
    let beta = match args.beta {
        Some(b) => b,
        None => match cfg.beta_override.get(variant.name()) {
            Some(&b) => b,
            None => cfg.beta_multipliers[0] * SolverConfig::default_beta(&shape, &file.data.mask),
        },
    };
    let solver_cfg = SolverConfig {
        alpha: cfg.solver.alpha,
        gamma: cfg.solver.gamma,
        epsilon: cfg.solver.epsilon,
        max_iter: cfg.solver.max_iter,
        stop: cfg.solver.stop_rule(),
        seed: cfg.seed,
        ..SolverConfig::new(cfg.ranks[0], beta).with_variant(variant)
    };
    solver_cfg.validate(&shape).map_err(|e| CliError::Config(e.to_string()))?;
    let out = solve(&file.data, &shape, &solver_cfg, None).map_err(|f| CliError::Solver(f.error.to_string()))?;

    let dir = PathBuf::from(&cfg.out_dir);
    write_estimate(&dir.join("estimate.csv"), &out.estimate)?;
    let mut trace = csv::Writer::from_writer(Vec::new());
    trace
        .write_record(["iteration", "objective", "subgradient_norm", "relative_change"])
        .expect("in-memory write");
    for rec in &out.trace.records {
        let opt = |v: Option<f64>| v.map(sci).unwrap_or_default();
        trace
            .write_record([rec.iteration.to_string(), opt(rec.objective.map(|o| o.total)), opt(rec.subgradient_norm), opt(rec.relative_change)])
            .expect("in-memory write");
    }
    write_atomic(&dir.join("curves").join("trace.csv"), &trace.into_inner().expect("flush"))?;
    let summary = serde_json::json!({
        "dims": file.dims,
        "rank": solver_cfg.rank,
        "beta": beta,
        "variant": variant.name(),
        "observed": file.data.mask.observed_count(),
        "iterations": out.trace.iterations(),
        "termination": out.termination.name(),
        "final_objective": out.trace.last().and_then(|r| r.objective).map(|o| o.total),
    });
    write_atomic(&dir.join("summary.json"), &serde_json::to_vec_pretty(&summary).expect("json"))?;
    eprintln!(
        "{} after {} iterations; estimate in {}",
        out.termination.name(),
        out.trace.iterations(),
        dir.join("estimate.csv").display()
    );
    Ok(())
}

fn write_estimate(path: &Path, x: &[num_complex::Complex64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "re", "im"]).expect("in-memory write");
    for (i, z) in x.iter().enumerate() {
        w.write_record([i.to_string(), sci(z.re), sci(z.im)]).expect("in-memory write");
    }
    write_atomic(path, &w.into_inner().expect("flush"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::PhaseTransition(a) => run_study(ExperimentKind::PhaseTransition, a),
        Command::Convergence(a) => run_study(ExperimentKind::Convergence, a),
        Command::NoiseTable(a) => run_study(ExperimentKind::NoiseTable, a),
        Command::SizeSweep(a) => run_study(ExperimentKind::SizeSweep, a),
        Command::Solve(a) => run_solve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lppg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
