//! Recovers a 2-D spectrally sparse signal from 40% of its samples.
//!
//! cargo run --release -p lppg-core --example recover

use lppg_core::model::{generate_signal, nmse, sample_uniform, ObservedData};
use lppg_core::solver::{solve, SolverConfig};
use lppg_core::HankelShape;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = [31, 31];
    let rank = 6;
    let shape = HankelShape::balanced(&dims)?;
    let (truth, _) = generate_signal(&dims, rank, false, 7)?;
    let mask = sample_uniform(shape.len(), 0.4, 8)?;
    let data = ObservedData::observe(&truth, mask)?;

    let beta = SolverConfig::default_beta(&shape, &data.mask);
    let cfg = SolverConfig::new(rank, beta);
    let out = solve(&data, &shape, &cfg, Some(&truth))?;

    for rec in out.trace.records.iter().step_by(10) {
        println!(
            "iter {:>4}  F = {:.3e}  nmse = {:.3e}",
            rec.iteration,
            rec.objective.map(|o| o.total).unwrap_or(f64::NAN),
            rec.nmse.unwrap_or(f64::NAN)
        );
    }
    println!(
        "stopped on {} after {} iterations, nmse {:.3e}",
        out.termination.name(),
        out.trace.iterations(),
        nmse(&out.estimate, &truth)?
    );
    Ok(())
}
