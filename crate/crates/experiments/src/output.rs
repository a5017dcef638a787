//! Result files: `results.csv`, `summary.json`, `curves/*.csv`, `timings.csv`,
//! and the append-only `results.partial.csv` written while a study runs.
//!
//! Floats are written as `{:.9e}` (ten significant digits). Everything except
//! `timings.csv` is a pure function of the config and seed.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::ExperimentKind;
use crate::runner::{ExperimentOutput, ResultRow, RunOutcome};
use crate::CliError;

pub const RESULTS_HEADER: [&str; 14] = [
    "experiment",
    "variant",
    "dims",
    "rank",
    "sampling_ratio",
    "beta_multiplier",
    "beta",
    "noise_level",
    "damped",
    "trial",
    "trial_seed",
    "nmse",
    "iterations",
    "termination",
];

pub const TERMINATIONS: [&str; 3] = ["tolerance", "max_iter", "rel_change"];

pub fn sci(v: f64) -> String {
    format!("{v:.9e}")
}

fn record(row: &ResultRow) -> [String; 14] {
    [
        row.experiment.clone(),
        row.variant.clone(),
        row.dims.clone(),
        row.rank.to_string(),
        sci(row.sampling_ratio),
        sci(row.beta_multiplier),
        sci(row.beta),
        sci(row.noise_level),
        row.damped.to_string(),
        row.trial.to_string(),
        row.trial_seed.to_string(),
        sci(row.nmse),
        row.iterations.to_string(),
        row.termination.clone(),
    ]
}

/// Serializes rows under the fixed header; an empty slice gives the header alone.
pub fn results_csv(rows: &[&ResultRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).expect("in-memory write");
    for row in rows {
        w.write_record(record(row)).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Append-only CSV that receives rows in completion order.
pub struct PartialSink {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl PartialSink {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|e| CliError::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(RESULTS_HEADER).map_err(|e| CliError::io(path, e.into()))?;
        writer.flush().map_err(|e| CliError::io(path, e))?;
        Ok(PartialSink {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn append(&mut self, row: &ResultRow) -> Result<(), CliError> {
        self.writer
            .write_record(record(row))
            .map_err(|e| CliError::io(&self.path, e.into()))?;
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Rows sharing every grid coordinate except the trial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub variant: String,
    pub dims: String,
    pub rank: usize,
    pub sampling_ratio: String,
    pub beta_multiplier: String,
}

impl GroupKey {
    fn of(row: &ResultRow) -> Self {
        GroupKey {
            variant: row.variant.clone(),
            dims: row.dims.clone(),
            rank: row.rank,
            sampling_ratio: sci(row.sampling_ratio),
            beta_multiplier: sci(row.beta_multiplier),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroupStats {
    pub trials: usize,
    pub mean_nmse: f64,
    pub median_nmse: f64,
    pub success_fraction: f64,
    pub mean_iterations: f64,
    pub terminations: BTreeMap<String, usize>,
    /// Mean NMSE per iteration when curves were recorded; shorter runs hold their last value.
    pub mean_curve: Option<Vec<f64>>,
}

pub fn group(out: &ExperimentOutput) -> BTreeMap<GroupKey, GroupStats> {
    let mut buckets: BTreeMap<GroupKey, Vec<&RunOutcome>> = BTreeMap::new();
    for run in &out.runs {
        buckets.entry(GroupKey::of(&run.row)).or_default().push(run);
    }
    let threshold = out.config.success_threshold;
    buckets
        .into_iter()
        .map(|(k, runs)| {
            let nmse: Vec<f64> = runs.iter().map(|r| r.row.nmse).collect();
            let its: Vec<f64> = runs.iter().map(|r| r.row.iterations as f64).collect();
            let mut terminations = BTreeMap::new();
            for r in &runs {
                *terminations.entry(r.row.termination.clone()).or_insert(0) += 1;
            }
            let curves: Vec<&Vec<f64>> = runs.iter().filter_map(|r| r.curve.as_ref()).collect();
            let mean_curve = (!curves.is_empty()).then(|| {
                let len = curves.iter().map(|c| c.len()).max().unwrap_or(0);
                (0..len)
                    .map(|i| mean(&curves.iter().map(|c| c[i.min(c.len() - 1)]).collect::<Vec<_>>()))
                    .collect()
            });
            let stats = GroupStats {
                trials: runs.len(),
                mean_nmse: mean(&nmse),
                median_nmse: median(&nmse),
                success_fraction: nmse.iter().filter(|&&e| e < threshold).count() as f64 / nmse.len() as f64,
                mean_iterations: mean(&its),
                terminations,
                mean_curve,
            };
            (k, stats)
        })
        .collect()
}

/// Per variant and dims: for each Sp, the largest rank whose success fraction
/// reaches one half (0 when none does).
pub fn phase_transition_curves(groups: &BTreeMap<GroupKey, GroupStats>) -> BTreeMap<(String, String), Vec<(f64, usize)>> {
    let mut best: BTreeMap<(String, String), BTreeMap<String, usize>> = BTreeMap::new();
    for (k, s) in groups {
        let slot = best
            .entry((k.variant.clone(), k.dims.clone()))
            .or_default()
            .entry(k.sampling_ratio.clone())
            .or_insert(0);
        if s.success_fraction >= 0.5 && k.rank > *slot {
            *slot = k.rank;
        }
    }
    best.into_iter()
        .map(|(key, per_sp)| {
            let mut pts: Vec<(f64, usize)> = per_sp
                .into_iter()
                .map(|(sp, r)| (sp.parse::<f64>().expect("formatted float"), r))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (key, pts)
        })
        .collect()
}

struct Series {
    name: String,
    header: [&'static str; 2],
    points: Vec<(String, String)>,
}

fn curves(out: &ExperimentOutput, groups: &BTreeMap<GroupKey, GroupStats>) -> Vec<Series> {
    let multi = |f: &dyn Fn(&GroupKey) -> String| {
        let mut seen: Vec<String> = groups.keys().map(f).collect();
        seen.sort();
        seen.dedup();
        seen.len() > 1
    };
    let label = |k: &GroupKey, parts: &[(&str, bool, String)]| {
        let mut name = k.variant.clone();
        for (tag, varies, value) in parts {
            if *varies {
                name.push_str(&format!("_{tag}{value}"));
            }
        }
        name
    };
    let vary_dims = multi(&|k| k.dims.clone());
    let vary_rank = multi(&|k| k.rank.to_string());
    let vary_sp = multi(&|k| k.sampling_ratio.clone());
    let vary_beta = multi(&|k| k.beta_multiplier.clone());
    let short = |s: &str| s.parse::<f64>().map(|v| v.to_string()).unwrap_or_else(|_| s.to_string());

    let mut series = Vec::new();
    match out.config.kind {
        ExperimentKind::PhaseTransition => {
            for ((variant, dims), pts) in phase_transition_curves(groups) {
                let name = if vary_dims { format!("phase_transition_{variant}_n{dims}") } else { format!("phase_transition_{variant}") };
                series.push(Series {
                    name,
                    header: ["sampling_ratio", "rank"],
                    points: pts.into_iter().map(|(sp, r)| (sci(sp), r.to_string())).collect(),
                });
            }
        }
        ExperimentKind::NoiseTable => {
            let mut by: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for (k, s) in groups {
                let name = label(k, &[("n", vary_dims, k.dims.clone()), ("r", vary_rank, k.rank.to_string()), ("sp", vary_sp, short(&k.sampling_ratio))]);
                by.entry(format!("noise_{name}")).or_default().push((k.beta_multiplier.parse().expect("float"), s.mean_nmse));
            }
            for (name, mut pts) in by {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                series.push(Series {
                    name,
                    header: ["beta_multiplier", "mean_nmse"],
                    points: pts.into_iter().map(|(x, y)| (sci(x), sci(y))).collect(),
                });
            }
        }
        ExperimentKind::SizeSweep => {
            let mut by: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
            for (k, s) in groups {
                let name = label(k, &[("r", vary_rank, k.rank.to_string()), ("sp", vary_sp, short(&k.sampling_ratio)), ("b", vary_beta, short(&k.beta_multiplier))]);
                let n: usize = k.dims.split('x').map(|d| d.parse::<usize>().expect("dims label")).product();
                by.entry(format!("size_{name}")).or_default().push((n, s.mean_nmse));
            }
            for (name, mut pts) in by {
                pts.sort_by_key(|p| p.0);
                series.push(Series {
                    name,
                    header: ["n", "mean_nmse"],
                    points: pts.into_iter().map(|(x, y)| (x.to_string(), sci(y))).collect(),
                });
            }
        }
        ExperimentKind::Convergence | ExperimentKind::Single => {}
    }
    for (k, s) in groups {
        if let Some(curve) = &s.mean_curve {
            let name = label(k, &[("n", vary_dims, k.dims.clone()), ("r", vary_rank, k.rank.to_string()), ("sp", vary_sp, short(&k.sampling_ratio)), ("b", vary_beta, short(&k.beta_multiplier))]);
            series.push(Series {
                name: format!("nmse_{name}"),
                header: ["iteration", "mean_nmse"],
                points: curve.iter().enumerate().map(|(i, y)| (i.to_string(), sci(*y))).collect(),
            });
        }
    }
    series
}

pub fn summary_json(out: &ExperimentOutput, groups: &BTreeMap<GroupKey, GroupStats>) -> Value {
    let mut totals: BTreeMap<String, usize> = TERMINATIONS.iter().map(|t| (t.to_string(), 0)).collect();
    for run in &out.runs {
        *totals.entry(run.row.termination.clone()).or_insert(0) += 1;
    }
    let group_list: Vec<Value> = groups
        .iter()
        .map(|(k, s)| {
            json!({
                "variant": k.variant,
                "dims": k.dims,
                "rank": k.rank,
                "sampling_ratio": k.sampling_ratio.parse::<f64>().ok(),
                "beta_multiplier": k.beta_multiplier.parse::<f64>().ok(),
                "trials": s.trials,
                "mean_nmse": s.mean_nmse,
                "median_nmse": s.median_nmse,
                "success_fraction": s.success_fraction,
                "mean_iterations": s.mean_iterations,
                "terminations": s.terminations,
            })
        })
        .collect();
    let cfg = &out.config;
    let mut v = json!({
        "experiment": cfg.name,
        "kind": cfg.kind.name(),
        "seed": cfg.seed,
        "trials": cfg.trials,
        "noise_level": cfg.noise_level,
        "damped": cfg.damped,
        "runs": out.runs.len(),
        "failures": out.failures.iter().map(|f| json!({
            "variant": f.variant, "dims": f.dims, "rank": f.rank, "trial": f.trial, "message": f.message,
        })).collect::<Vec<_>>(),
        "terminations": totals,
        "groups": group_list,
    });
    if cfg.kind == ExperimentKind::PhaseTransition {
        let curves: BTreeMap<String, Vec<(f64, usize)>> = phase_transition_curves(groups)
            .into_iter()
            .map(|((variant, dims), pts)| (format!("{variant}/{dims}"), pts))
            .collect();
        v["phase_transition"] = json!(curves);
    }
    v
}

fn timings_csv(out: &ExperimentOutput) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for run in &out.runs {
        w.serialize(&run.timing).expect("in-memory write");
    }
    if out.runs.is_empty() {
        w.write_record(["variant", "dims", "rank", "sampling_ratio", "beta_multiplier", "trial", "seconds", "mean_step_seconds"])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes every output file under `dir` and removes the partial sink.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<(), CliError> {
    let groups = group(out);
    write_atomic(&dir.join("results.csv"), &results_csv(&out.rows()))?;
    let summary = serde_json::to_vec_pretty(&summary_json(out, &groups)).expect("json serializes");
    write_atomic(&dir.join("summary.json"), &summary)?;
    let curve_dir = dir.join("curves");
    for s in curves(out, &groups) {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(s.header).expect("in-memory write");
        for (x, y) in &s.points {
            w.write_record([x, y]).expect("in-memory write");
        }
        write_atomic(&curve_dir.join(format!("{}.csv", s.name)), &w.into_inner().expect("flush"))?;
    }
    write_atomic(&dir.join("timings.csv"), &timings_csv(out))?;
    write_atomic(&dir.join("config.toml"), out.config.to_toml().as_bytes())?;
    let partial = dir.join("results.partial.csv");
    if partial.exists() {
        fs::remove_file(&partial).map_err(|e| CliError::io(&partial, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, nmse: f64) -> ResultRow {
        ResultRow {
            experiment: "t".into(),
            variant: "lppg".into(),
            dims: "15".into(),
            rank: 2,
            sampling_ratio: 0.5,
            beta_multiplier: 1.0,
            beta: 0.1,
            noise_level: 0.0,
            damped: false,
            trial,
            trial_seed: 9,
            nmse,
            iterations: 4,
            termination: "tolerance".into(),
        }
    }

    #[test]
    fn empty_rows_give_header_only() {
        let bytes = results_csv(&[]);
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{}\n", RESULTS_HEADER.join(",")));
    }

    #[test]
    fn floats_use_ten_significant_digits() {
        assert_eq!(sci(0.136), "1.360000000e-1");
        let r = row(0, 1.0 / 3.0);
        let text = String::from_utf8(results_csv(&[&r])).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",3.333333333e-1,"));
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0]), 1.5);
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a").join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
