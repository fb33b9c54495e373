//! Experiment configuration, the synthetic presets, and CSV/JSON output.
//!
//! Arm and preference labels in configs and summaries are 1-based.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundInputs, BoundReport};
use crate::env::{
    build_synthetic, build_synthetic_bernoulli, ArmDistribution, InstanceSummary,
    PreferenceModel, ProblemInstance, SYNTHETIC_DIM,
};
use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::sim::{run_experiment, verify_counters, ExperimentResult, DEFAULT_CHECKPOINT_STRIDE};

pub const DEFAULT_PATHS: usize = 20;
pub const PRESET_HORIZON: u64 = 100_000;

fn default_gamma() -> f64 {
    1.0
}
fn default_active() -> Vec<usize> {
    (1..=SYNTHETIC_DIM).collect()
}
fn default_paths() -> usize {
    DEFAULT_PATHS
}
fn default_stride() -> u64 {
    DEFAULT_CHECKPOINT_STRIDE
}
fn default_true() -> bool {
    true
}
fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::Wucb]
}
fn default_curves_path() -> PathBuf {
    PathBuf::from("curves.csv")
}
fn default_summary_path() -> PathBuf {
    PathBuf::from("summary.json")
}
fn default_alpha() -> f64 {
    0.99
}
fn default_c_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticInstance {
    pub k_total: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// 1-based preference labels.
    #[serde(default = "default_active")]
    pub active_preferences: Vec<usize>,
    #[serde(default)]
    pub mix_seed: u64,
    /// Use the Bernoulli-coordinate companion with the same means.
    #[serde(default)]
    pub finite_support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInstance {
    pub arms: Vec<ArmDistribution>,
    pub preferences: PreferenceModel,
}

/// Serialized with a `kind` tag. Deserialization goes through
/// [`parse_instance`] so that schema errors keep their full path.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceConfig {
    Synthetic(SyntheticInstance),
    Explicit(ExplicitInstance),
}

impl<'de> Deserialize<'de> for InstanceConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        parse_instance(value).map_err(serde::de::Error::custom)
    }
}

fn schema_error<E: std::fmt::Display>(prefix: &str, e: serde_path_to_error::Error<E>) -> Error {
    let inner = e.path().to_string();
    let path = match inner.as_str() {
        "" | "." => prefix.to_string(),
        _ if prefix.is_empty() => inner,
        _ => format!("{prefix}.{inner}"),
    };
    Error::Schema {
        path,
        message: e.into_inner().to_string(),
    }
}

/// Decodes an instance object, reporting schema paths relative to the
/// config root (`instance.…`).
pub fn parse_instance(mut value: serde_json::Value) -> Result<InstanceConfig> {
    let schema = |path: &str, message: &str| Error::Schema {
        path: path.into(),
        message: message.into(),
    };
    let map = value
        .as_object_mut()
        .ok_or_else(|| schema("instance", "expected an object"))?;
    let kind = match map.remove("kind") {
        Some(serde_json::Value::String(k)) => k,
        Some(_) => return Err(schema("instance.kind", "expected a string")),
        None => return Err(schema("instance.kind", "missing field `kind`")),
    };
    match kind.as_str() {
        "synthetic" => serde_path_to_error::deserialize(value)
            .map(InstanceConfig::Synthetic)
            .map_err(|e| schema_error("instance", e)),
        "explicit" => serde_path_to_error::deserialize(value)
            .map(InstanceConfig::Explicit)
            .map_err(|e| schema_error("instance", e)),
        other => Err(schema(
            "instance.kind",
            &format!("unknown instance kind `{other}`, expected `synthetic` or `explicit`"),
        )),
    }
}

impl InstanceConfig {
    pub fn synthetic(k_total: usize, gamma: f64, active_preferences: Vec<usize>, mix_seed: u64) -> Self {
        InstanceConfig::Synthetic(SyntheticInstance {
            k_total,
            gamma,
            active_preferences,
            mix_seed,
            finite_support: false,
        })
    }

    pub fn k(&self) -> usize {
        match self {
            InstanceConfig::Synthetic(s) => s.k_total,
            InstanceConfig::Explicit(e) => e.arms.len(),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            InstanceConfig::Synthetic(s) => s.gamma,
            InstanceConfig::Explicit(_) => 1.0,
        }
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            InstanceConfig::Synthetic(s) => {
                let active: Vec<usize> = s.active_preferences.iter().map(|k| k - 1).collect();
                if s.finite_support {
                    build_synthetic_bernoulli(s.k_total, s.gamma, &active, s.mix_seed)
                } else {
                    build_synthetic(s.k_total, s.gamma, &active, s.mix_seed)
                }
            }
            InstanceConfig::Explicit(e) => ProblemInstance::new(e.arms.clone(), e.preferences.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: u64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_stride")]
    pub checkpoint_stride: u64,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_curves_path")]
    pub curves_path: PathBuf,
    #[serde(default = "default_summary_path")]
    pub summary_path: PathBuf,
    /// Include pull counters in the summary.
    #[serde(default = "default_true")]
    pub counters: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            curves_path: default_curves_path(),
            summary_path: default_summary_path(),
            counters: true,
        }
    }
}

/// Parameters of the lower bound that the instance does not determine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_c_alpha")]
    pub c_alpha: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            c_alpha: default_c_alpha(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig<I = InstanceConfig> {
    pub instance: I,
    pub run: RunConfig,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if let InstanceConfig::Synthetic(SyntheticInstance {
            k_total,
            gamma,
            active_preferences,
            ..
        }) = &self.instance
        {
            if !(*gamma > 0.0 && *gamma <= 1.0) {
                return Err(invalid("instance.gamma", format!("{gamma} is not in (0, 1]")));
            }
            if *k_total < SYNTHETIC_DIM {
                return Err(invalid(
                    "instance.k_total",
                    format!("must be at least {SYNTHETIC_DIM}, got {k_total}"),
                ));
            }
            let mut seen = [false; SYNTHETIC_DIM];
            if active_preferences.is_empty() {
                return Err(invalid("instance.active_preferences", "must not be empty"));
            }
            for &p in active_preferences {
                if !(1..=SYNTHETIC_DIM).contains(&p) || std::mem::replace(&mut seen[p - 1], true) {
                    return Err(invalid(
                        "instance.active_preferences",
                        format!("entries must be distinct values in 1..={SYNTHETIC_DIM}, got {p}"),
                    ));
                }
            }
        }
        if let InstanceConfig::Explicit(_) = &self.instance {
            self.instance
                .build()
                .map_err(|e| invalid("instance", e.to_string()))?;
        }
        let k = self.instance.k() as u64;
        if self.run.horizon < k {
            return Err(invalid(
                "run.horizon",
                format!("horizon {} is shorter than K = {k}", self.run.horizon),
            ));
        }
        if self.run.paths == 0 {
            return Err(invalid("run.paths", "must be at least 1"));
        }
        if self.run.checkpoint_stride == 0 {
            return Err(invalid("run.checkpoint_stride", "must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(invalid("policies", "must name at least one policy"));
        }
        for (n, p) in self.policies.iter().enumerate() {
            if self.policies[..n].contains(p) {
                return Err(invalid(&format!("policies[{n}]"), format!("duplicate policy {p}")));
            }
        }
        if !(self.bounds.alpha > 0.0 && self.bounds.alpha < 1.0) {
            return Err(invalid("bounds.alpha", "must lie in (0, 1)"));
        }
        if !(self.bounds.c_alpha > 0.0) {
            return Err(invalid("bounds.c_alpha", "must be positive"));
        }
        Ok(())
    }
}

/// Parses and validates a JSON experiment config, filling in defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: ExperimentConfig<serde_json::Value> =
        serde_path_to_error::deserialize(de).map_err(|e| schema_error("", e))?;
    let config = ExperimentConfig {
        instance: parse_instance(raw.instance)?,
        run: raw.run,
        policies: raw.policies,
        output: raw.output,
        bounds: raw.bounds,
    };
    config.validate()?;
    Ok(config)
}

/// Labels attached to every curve row of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLabel {
    pub name: String,
    pub k: usize,
    pub gamma: f64,
    pub s1_size: usize,
}

/// One executed configuration.
#[derive(Debug, Clone)]
pub struct ConfigRun {
    pub label: RunLabel,
    pub instance: ProblemInstance,
    pub summary: InstanceSummary,
    pub result: ExperimentResult,
}

pub fn run_config(name: &str, config: &ExperimentConfig) -> Result<ConfigRun> {
    let instance = config.instance.build()?;
    let summary = instance.summarize()?;
    let result = run_experiment(
        &instance,
        &config.policies,
        config.run.horizon,
        config.run.paths,
        config.run.base_seed,
        config.run.checkpoint_stride,
        config.run.parallel,
    )?;
    Ok(ConfigRun {
        label: RunLabel {
            name: name.to_string(),
            k: instance.k(),
            gamma: config.instance.gamma(),
            s1_size: summary.s1.len(),
        },
        instance,
        summary,
        result,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub policy: PolicyKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub gamma: f64,
    pub s1_size: usize,
    pub t: u64,
    pub mean_pseudo_regret: f64,
    pub std_pseudo_regret: f64,
    pub mean_realized_regret: f64,
    pub std_realized_regret: f64,
}

/// Rows sorted by `(policy name, t)`.
pub fn curve_rows(label: &RunLabel, result: &ExperimentResult) -> Vec<CurveRow> {
    let mut rows: Vec<CurveRow> = result
        .runs
        .iter()
        .flat_map(|run| {
            run.pseudo
                .checkpoints
                .iter()
                .enumerate()
                .map(move |(c, &t)| CurveRow {
                    policy: run.policy,
                    k: label.k,
                    gamma: label.gamma,
                    s1_size: label.s1_size,
                    t,
                    mean_pseudo_regret: run.pseudo.mean[c],
                    std_pseudo_regret: run.pseudo.std[c],
                    mean_realized_regret: run.realized.mean[c],
                    std_realized_regret: run.realized.std[c],
                })
        })
        .collect();
    rows.sort_by(|a, b| (a.policy.as_str(), a.t).cmp(&(b.policy.as_str(), b.t)));
    rows
}

pub fn write_curves<W: Write>(rows: &[CurveRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_curves(label: &RunLabel, result: &ExperimentResult, path: &Path) -> Result<()> {
    write_curves(&curve_rows(label, result), BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterSummary {
    /// Across-path mean of `N_i(T)`, in arm order.
    pub mean_n_i: Vec<f64>,
    /// Across-path mean of `N_i^j(T)`: row `i`, column `j`.
    pub mean_n_i_j: Vec<Vec<f64>>,
    /// Across-path mean of `Σ_{j∈S_1} N_i^j(T)` for each `i ∈ S_2`, keyed by arm label.
    pub mean_pulls_of_s2: BTreeMap<usize, f64>,
    pub identities_hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub final_mean_pseudo_regret: f64,
    pub final_std_pseudo_regret: f64,
    pub final_mean_realized_regret: f64,
    pub final_std_realized_regret: f64,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counters: Option<CounterSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub gamma: f64,
    pub horizon: u64,
    pub paths: usize,
    pub base_seed: u64,
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub rho: Vec<f64>,
    pub l: f64,
    pub h: f64,
    pub theorem1_leading: f64,
    pub bounds: BoundReport,
    pub policies: Vec<PolicySummary>,
}

fn labels(arms: &[usize]) -> Vec<usize> {
    arms.iter().map(|a| a + 1).collect()
}

pub fn bound_report(
    instance: &ProblemInstance,
    summary: &InstanceSummary,
    horizon: u64,
    bounds: &BoundsConfig,
) -> Result<BoundReport> {
    let inputs = BoundInputs::from_summary(
        summary,
        instance.dim(),
        horizon as f64,
        bounds.alpha,
        bounds.c_alpha,
    )?;
    let mut report = BoundReport::evaluate(instance, inputs)?;
    report.kl_min = report
        .kl_min
        .map(|m| m.into_iter().map(|(i, v)| (i + 1, v)).collect());
    Ok(report)
}

pub fn summarize_run(run: &ConfigRun, bounds: &BoundsConfig, counters: bool) -> Result<RunSummary> {
    let horizon = run.result.horizon;
    let report = bound_report(&run.instance, &run.summary, horizon, bounds)?;
    let policies = run
        .result
        .runs
        .iter()
        .map(|pr| {
            let counters = counters.then(|| {
                let mean_n_i_j = pr.mean_n_i_j();
                let mean_pulls_of_s2 = run
                    .summary
                    .s2
                    .iter()
                    .map(|&i| (i + 1, run.summary.s1.iter().map(|&j| mean_n_i_j[i][j]).sum()))
                    .collect();
                CounterSummary {
                    mean_n_i: pr.mean_n_i(),
                    mean_n_i_j,
                    mean_pulls_of_s2,
                    identities_hold: pr
                        .traces
                        .iter()
                        .all(|t| verify_counters(t, horizon).all_passed()),
                }
            });
            let last = |v: &[f64]| v.last().copied().unwrap_or(0.0);
            PolicySummary {
                policy: pr.policy,
                final_mean_pseudo_regret: last(&pr.pseudo.mean),
                final_std_pseudo_regret: last(&pr.pseudo.std),
                final_mean_realized_regret: last(&pr.realized.mean),
                final_std_realized_regret: last(&pr.realized.std),
                seeds: pr.seeds(),
                counters,
            }
        })
        .collect();
    Ok(RunSummary {
        name: run.label.name.clone(),
        k: run.label.k,
        d: run.instance.dim(),
        gamma: run.label.gamma,
        horizon,
        paths: run.result.runs.first().map_or(0, |r| r.traces.len()),
        base_seed: run.result.base_seed,
        s1: labels(&run.summary.s1),
        s2: labels(&run.summary.s2),
        rho: run.summary.rho.clone(),
        l: run.summary.l,
        h: run.summary.h,
        theorem1_leading: report.theorem1_leading,
        bounds: report,
        policies,
    })
}

pub fn emit_summary<T: Serialize + ?Sized>(summary: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn resolve(out_dir: Option<&Path>, path: &Path) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// `simulate`: runs a config and writes its curves and summary. Returns the
/// written paths.
pub fn simulate(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let run = run_config("simulate", config)?;
    let curves = resolve(out_dir, &config.output.curves_path);
    let summary_path = resolve(out_dir, &config.output.summary_path);
    emit_curves(&run.label, &run.result, &curves)?;
    let summary = summarize_run(&run, &config.bounds, config.output.counters)?;
    emit_summary(&summary, &summary_path)?;
    Ok(vec![curves, summary_path])
}

/// Bound report for the instance and horizon of a config, with the instance facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsOutput {
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub rho: Vec<f64>,
    pub l: f64,
    pub h: f64,
    pub bounds: BoundReport,
}

pub fn bounds_for_config(config: &ExperimentConfig) -> Result<BoundsOutput> {
    let instance = config.instance.build()?;
    let summary = instance.summarize()?;
    let bounds = bound_report(&instance, &summary, config.run.horizon, &config.bounds)?;
    Ok(BoundsOutput {
        k: instance.k(),
        d: instance.dim(),
        s1: labels(&summary.s1),
        s2: labels(&summary.s2),
        rho: summary.rho,
        l: summary.l,
        h: summary.h,
        bounds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// K ∈ {5, 10, 15, 20}, γ = 1, all five preferences.
    Fig1a,
    /// K = 10, γ ∈ {1.0, 0.7, 0.5} on paired state draws.
    Fig1b,
    /// K = 5, |S_1| ∈ {2, 3, 4, 5}.
    Fig1c,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1a" => Ok(Preset::Fig1a),
            "fig1b" => Ok(Preset::Fig1b),
            "fig1c" => Ok(Preset::Fig1c),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Fig1c => "fig1c",
        }
    }

    /// Named instance configs. Every configuration shares `base_seed` as its
    /// mixing seed and path seed base, so fig1b's γ values see identical
    /// unscaled draws and fig1a's larger K extend the smaller ones.
    pub fn instances(self, base_seed: u64) -> Vec<(String, InstanceConfig)> {
        let all = default_active();
        match self {
            Preset::Fig1a => [5, 10, 15, 20]
                .into_iter()
                .map(|k| {
                    (
                        format!("fig1a_K{k}"),
                        InstanceConfig::synthetic(k, 1.0, all.clone(), base_seed),
                    )
                })
                .collect(),
            Preset::Fig1b => [(1.0, "1.0"), (0.7, "0.7"), (0.5, "0.5")]
                .into_iter()
                .map(|(g, tag)| {
                    (
                        format!("fig1b_gamma{tag}"),
                        InstanceConfig::synthetic(10, g, all.clone(), base_seed),
                    )
                })
                .collect(),
            Preset::Fig1c => (2..=5)
                .map(|s| {
                    (
                        format!("fig1c_S1_{s}"),
                        InstanceConfig::synthetic(5, 1.0, (1..=s).collect(), base_seed),
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PresetOptions {
    pub horizon: u64,
    pub paths: usize,
    pub checkpoint_stride: u64,
    pub parallel: bool,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            horizon: PRESET_HORIZON,
            paths: DEFAULT_PATHS,
            checkpoint_stride: DEFAULT_CHECKPOINT_STRIDE,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PresetOutput {
    pub runs: Vec<ConfigRun>,
    pub files: Vec<PathBuf>,
}

impl PresetOutput {
    pub fn run(&self, name: &str) -> Option<&ConfigRun> {
        self.runs.iter().find(|r| r.label.name == name)
    }
}

/// Runs every configuration of a preset with W-UCB, writing `<name>.csv` per
/// configuration and `<preset>_summary.json`.
pub fn run_preset(
    preset: Preset,
    base_seed: u64,
    out_dir: &Path,
    options: &PresetOptions,
) -> Result<PresetOutput> {
    std::fs::create_dir_all(out_dir)?;
    let mut runs = Vec::new();
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for (name, instance) in preset.instances(base_seed) {
        let config = ExperimentConfig {
            instance,
            run: RunConfig {
                horizon: options.horizon,
                paths: options.paths,
                base_seed,
                checkpoint_stride: options.checkpoint_stride,
                parallel: options.parallel,
            },
            policies: default_policies(),
            output: OutputConfig::default(),
            bounds: BoundsConfig::default(),
        };
        config.validate()?;
        let run = run_config(&name, &config)?;
        let path = out_dir.join(format!("{name}.csv"));
        emit_curves(&run.label, &run.result, &path)?;
        files.push(path);
        summaries.push(summarize_run(&run, &config.bounds, true)?);
        runs.push(run);
    }
    let summary_path = out_dir.join(format!("{}_summary.json", preset.name()));
    emit_summary(&summaries, &summary_path)?;
    files.push(summary_path);
    Ok(PresetOutput { runs, files })
}
