//! Experiment configuration. A config is a preset for its kind with an optional
//! TOML file merged over it, then command-line overrides on top.

use std::collections::BTreeMap;
use std::path::Path;

use lppg_core::solver::{StopRule, Variant};
use lppg_core::HankelShape;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PhaseTransition,
    Convergence,
    NoiseTable,
    SizeSweep,
    Single,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PhaseTransition => "phase_transition",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::NoiseTable => "noise_table",
            ExperimentKind::SizeSweep => "size_sweep",
            ExperimentKind::Single => "single",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopKind {
    Subgradient,
    RelChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Relative subgradient tolerance.
    pub epsilon: f64,
    pub max_iter: usize,
    pub stop: StopKind,
    /// Threshold for the relative-change rule.
    pub rel_tol: f64,
    pub alpha: f64,
    /// Fixed step size; omitted means `1/beta` (or the global PG step).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            epsilon: 1e-6,
            max_iter: 1000,
            stop: StopKind::Subgradient,
            rel_tol: 1e-3,
            alpha: 1e-20,
            gamma: None,
        }
    }
}

impl SolverSection {
    pub fn stop_rule(&self) -> StopRule {
        match self.stop {
            StopKind::Subgradient => StopRule::Subgradient,
            StopKind::RelChange => StopRule::RelativeChange(self.rel_tol),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Experiment id written into every result row.
    pub name: String,
    /// Signal dimensions; one entry per size in the sweep.
    pub dims: Vec<Vec<usize>>,
    /// Per-level row counts `p_i`; omitted means the balanced split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<usize>>,
    pub ranks: Vec<usize>,
    pub sampling_ratios: Vec<f64>,
    pub damped: bool,
    /// Relative noise level `eta`; 1 is 0 dB.
    pub noise_level: f64,
    /// `beta = multiplier * Sp N / (P Q)`.
    pub beta_multipliers: Vec<f64>,
    /// Absolute `beta` per variant name, replacing the multiplier grid for that variant.
    #[serde(default)]
    pub beta_override: BTreeMap<String, f64>,
    pub trials: usize,
    pub seed: u64,
    pub variants: Vec<String>,
    /// NMSE below this counts as a successful recovery.
    pub success_threshold: f64,
    /// Keep per-iteration NMSE for averaged curves.
    pub record_curves: bool,
    pub out_dir: String,
    pub solver: SolverSection,
}

impl ExperimentConfig {
    /// Full-scale preset; `quick` drops to 10 trials with the same dimensions.
    pub fn preset(kind: ExperimentKind, quick: bool) -> Self {
        let base = ExperimentConfig {
            kind,
            name: kind.name().to_string(),
            dims: vec![vec![63]],
            rows: None,
            ranks: vec![3],
            sampling_ratios: vec![0.5],
            damped: false,
            noise_level: 0.0,
            beta_multipliers: vec![1.0],
            beta_override: BTreeMap::new(),
            trials: 50,
            seed: 2024,
            variants: vec!["lppg".into()],
            success_threshold: 1e-3,
            record_curves: false,
            out_dir: format!("results/{}", kind.name()),
            solver: SolverSection::default(),
        };
        let mut cfg = match kind {
            ExperimentKind::PhaseTransition => ExperimentConfig {
                dims: vec![vec![63]],
                rows: Some(vec![32]),
                ranks: (1..=16).collect(),
                sampling_ratios: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
                ..base
            },
            ExperimentKind::Convergence => ExperimentConfig {
                dims: vec![vec![31, 31]],
                ranks: vec![15],
                sampling_ratios: vec![0.3],
                beta_override: [("lppg".to_string(), 1e-6), ("mpg".to_string(), 1e-6)].into(),
                variants: vec!["lppg".into(), "mpg".into(), "pg".into()],
                record_curves: true,
                solver: SolverSection {
                    epsilon: 0.0,
                    max_iter: 100,
                    ..SolverSection::default()
                },
                ..base
            },
            ExperimentKind::NoiseTable => ExperimentConfig {
                dims: vec![vec![15, 15, 15]],
                ranks: vec![10],
                sampling_ratios: vec![1.0],
                noise_level: 1.0,
                beta_multipliers: vec![1.0, 10.0, 100.0],
                variants: vec!["lppg".into(), "mpg".into()],
                solver: SolverSection {
                    stop: StopKind::RelChange,
                    ..SolverSection::default()
                },
                ..base
            },
            ExperimentKind::SizeSweep => ExperimentConfig {
                dims: vec![vec![17], vec![33], vec![65], vec![129]],
                ranks: vec![2],
                sampling_ratios: vec![1.0],
                noise_level: 1.0,
                beta_multipliers: vec![100.0],
                variants: vec!["lppg".into(), "mpg".into(), "pg".into()],
                ..base
            },
            ExperimentKind::Single => ExperimentConfig { trials: 1, ..base },
        };
        if quick {
            cfg.trials = cfg.trials.min(10);
        }
        cfg
    }

    /// Preset for `kind` with the TOML text merged over it. Tables merge key by
    /// key; any other value replaces the preset's.
    pub fn from_toml_over_preset(kind: ExperimentKind, quick: bool, text: &str) -> Result<Self, CliError> {
        let preset = Self::preset(kind, quick);
        let mut merged = toml::Value::try_from(&preset).map_err(|e| CliError::Config(e.to_string()))?;
        let patch: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(k) = patch.get("kind") {
            if k.as_str() != Some(kind.name()) {
                return Err(CliError::Config(format!(
                    "config declares kind {k} but the subcommand runs {}",
                    kind.name()
                )));
            }
        }
        // A preset's explicit split belongs to the preset's dims.
        if patch.get("dims").is_some() && patch.get("rows").is_none() {
            if let Some(t) = merged.as_table_mut() {
                t.remove("rows");
            }
        }
        merge(&mut merged, patch);
        let cfg: ExperimentConfig = merged.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(kind: ExperimentKind, quick: bool, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_over_preset(kind, quick, &text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn parsed_variants(&self) -> Result<Vec<Variant>, CliError> {
        self.variants
            .iter()
            .map(|v| v.parse::<Variant>().map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }

    pub fn shape_for(&self, dims: &[usize]) -> Result<HankelShape, CliError> {
        let shape = match &self.rows {
            None => HankelShape::balanced(dims),
            Some(p) => {
                if p.len() != dims.len() {
                    return Err(CliError::Config(format!(
                        "rows has {} entries but dims {dims:?} has {} levels",
                        p.len(),
                        dims.len()
                    )));
                }
                dims.iter()
                    .zip(p)
                    .map(|(&n, &p)| lppg_core::Level::new(n, p, (n + 1).saturating_sub(p)))
                    .collect::<Result<Vec<_>, _>>()
                    .and_then(HankelShape::new)
            }
        };
        shape.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.dims.is_empty() || self.dims.iter().any(|d| d.is_empty() || d.contains(&0)) {
            return fail("dims must be a non-empty list of non-empty positive sizes".into());
        }
        if self.ranks.is_empty() || self.ranks.contains(&0) {
            return fail("ranks must be a non-empty list of positive ranks".into());
        }
        if self.sampling_ratios.is_empty() || self.sampling_ratios.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
            return fail("sampling_ratios must be non-empty and lie in (0, 1]".into());
        }
        if self.beta_multipliers.is_empty() || self.beta_multipliers.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return fail("beta_multipliers must be non-empty and positive".into());
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return fail(format!("noise_level {} must be nonnegative", self.noise_level));
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.variants.is_empty() {
            return fail("at least one variant is required".into());
        }
        self.parsed_variants()?;
        for (name, beta) in &self.beta_override {
            let v: Variant = name.parse().map_err(|e: lppg_core::Error| CliError::Config(e.to_string()))?;
            if !(*beta > 0.0 && beta.is_finite()) {
                return fail(format!("beta_override for {v} must be positive"));
            }
        }
        if self.solver.max_iter == 0 && self.record_curves {
            log::warn!("record_curves with max_iter = 0 yields single-point curves");
        }
        if !(self.solver.alpha > 0.0) || !(self.solver.epsilon >= 0.0) || !(self.solver.rel_tol >= 0.0) {
            return fail("solver alpha must be positive and tolerances nonnegative".into());
        }
        for dims in &self.dims {
            let shape = self.shape_for(dims)?;
            let full = shape.rows().min(shape.cols());
            if let Some(&r) = self.ranks.iter().find(|&&r| r > full) {
                return fail(format!("rank {r} exceeds min(P, Q) = {full} for dims {dims:?}"));
            }
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Value, patch: toml::Value) {
    match (base, patch) {
        (toml::Value::Table(b), toml::Value::Table(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
