//! Multi-trial benchmark runs: configuration, paired execution across
//! acquisition rules, aggregation and persistence.

mod io;
mod plot;
mod presets;

pub use io::{
    load_traces, read_trace, trace_file_name, write_aggregate_csv, write_check_reports,
    write_results, write_trace,
};
pub use plot::{emit_plot_data, render_svg, rule_style, Metric};
pub use presets::{benchmark_rules, preset, presets, Preset};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisitions::AcquisitionRule;
use crate::driver::{hex, run_trial, run_trial_observed, Objective, TrialSetup, TrialTrace};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::points::Points;
use crate::sampling::{PathSampler, DEFAULT_FEATURES};
use crate::seeds;
use crate::synthetic::{make_grid, sample_objective, GridSpec};
use crate::theory::{
    bcr_bound, compute_constants, mig_greedy, BoundConstants, CheckReport, EtaLemmaCheck,
    EtaLemmaReport, MeanReferenceCheck, VarianceFloorCheck,
};

/// How posterior sample paths are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSampling {
    /// Exact on grids up to 2000 points, random features above.
    #[default]
    Auto,
    Exact,
    Fourier,
}

fn default_features() -> usize {
    DEFAULT_FEATURES
}

fn default_delta() -> f64 {
    0.05
}

/// A benchmark experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub master_seed: u64,
    pub trials: usize,
    pub horizon: usize,
    /// Observation noise standard deviation σ.
    pub noise_sd: f64,
    /// Size of the initial design; `2^d` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_count: Option<usize>,
    #[serde(default)]
    pub path_sampling: PathSampling,
    #[serde(default = "default_features")]
    pub rff_features: usize,
    /// Confidence level of the regret-bound checks.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    pub rules: Vec<AcquisitionRule>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return fail(format!("noise_sd must be positive, got {}", self.noise_sd));
        }
        if self.rff_features == 0 {
            return fail("rff_features must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        self.grid.validate()?;
        self.kernel.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.kernel.dim() != self.grid.dim {
            return fail(format!(
                "kernel has {} lengthscales but the grid has dimension {}",
                self.kernel.dim(),
                self.grid.dim
            ));
        }
        let size = self.grid.size().unwrap_or(usize::MAX);
        let init = self.init_count();
        if init > size {
            return fail(format!("init_count {init} exceeds grid size {size}"));
        }
        for (i, rule) in self.rules.iter().enumerate() {
            rule.validate()?;
            if self.rules[..i].iter().any(|r| r.slug() == rule.slug()) {
                return fail(format!("rule {} listed twice", rule.name()));
            }
            if matches!(rule, AcquisitionRule::Ei) && init == 0 {
                return fail("GP-EI needs init_count >= 1".into());
            }
        }
        Ok(())
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_sd * self.noise_sd
    }

    pub fn init_count(&self) -> usize {
        self.init_count
            .unwrap_or_else(|| 1usize.checked_shl(self.grid.dim as u32).unwrap_or(usize::MAX))
    }

    /// Sampler for a grid with `grid_len` points.
    pub fn sampler(&self, grid_len: usize) -> PathSampler {
        match self.path_sampling {
            PathSampling::Auto => PathSampler::auto(grid_len, self.rff_features),
            PathSampling::Exact => PathSampler::Exact,
            PathSampling::Fourier => PathSampler::Fourier { features: self.rff_features },
        }
    }

    /// SHA-256 of the configuration without its output directory.
    pub fn fingerprint(&self) -> Result<String> {
        let text = ExperimentConfig { output_dir: None, ..self.clone() }.to_toml()?;
        Ok(hex(&Sha256::digest(text.as_bytes())))
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        seeds::derive_indexed(self.master_seed, "trial", trial as u64)
    }

    /// Ground-truth objective of trial `trial`, shared by all rules.
    pub fn objective(&self, grid: &Points, trial: usize) -> Result<Objective> {
        let mut rng = seeds::rng(seeds::derive(self.trial_seed(trial), "objective"));
        sample_objective(&self.kernel, grid, &mut rng)
    }
}

/// Mean and standard error curves of one rule.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleAggregate {
    pub rule: AcquisitionRule,
    pub trials: usize,
    pub simple_mean: Vec<f64>,
    pub simple_stderr: Vec<f64>,
    pub cum_mean: Vec<f64>,
    pub cum_stderr: Vec<f64>,
}

impl RuleAggregate {
    pub fn horizon(&self) -> usize {
        self.simple_mean.len()
    }
}

/// Per-rule regret curves across trials.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateResult {
    pub config_fingerprint: String,
    /// Sorted by rule name.
    pub rules: Vec<RuleAggregate>,
    /// Seconds spent producing the traces; not persisted.
    pub wall_time: Option<f64>,
}

impl AggregateResult {
    pub fn rule(&self, rule: &AcquisitionRule) -> Option<&RuleAggregate> {
        self.rules.iter().find(|r| &r.rule == rule)
    }
}

fn mean_stderr(columns: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = columns.len() as f64;
    let len = columns[0].len();
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    for t in 0..len {
        let m = columns.iter().map(|c| c[t]).sum::<f64>() / n;
        let se = if columns.len() < 2 {
            0.0
        } else {
            let var = columns.iter().map(|c| (c[t] - m).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        mean.push(m);
        stderr.push(se);
    }
    (mean, stderr)
}

/// Pointwise mean and standard error (sample sd / √n) of each rule's
/// curves. The result does not depend on the order of `traces`.
pub fn aggregate(traces: &[TrialTrace]) -> Result<AggregateResult> {
    let fingerprint = traces.first().map(|t| t.config_fingerprint.clone()).unwrap_or_default();
    if traces.iter().any(|t| t.config_fingerprint != fingerprint) {
        return Err(Error::Config("traces come from different configurations".into()));
    }
    let mut by_rule: Vec<(String, Vec<&TrialTrace>)> = Vec::new();
    for t in traces {
        let name = t.rule.name();
        match by_rule.iter_mut().find(|(n, _)| *n == name) {
            Some((_, v)) => v.push(t),
            None => by_rule.push((name, vec![t])),
        }
    }
    by_rule.sort_by(|a, b| a.0.cmp(&b.0));
    let mut rules = Vec::with_capacity(by_rule.len());
    for (_, mut group) in by_rule {
        group.sort_by_key(|t| t.trial);
        let horizon = group[0].horizon();
        if group.iter().any(|t| t.horizon() != horizon) || horizon == 0 {
            return Err(Error::Config(format!(
                "{}: traces have unequal or zero horizons",
                group[0].rule.name()
            )));
        }
        let simple: Vec<Vec<f64>> = group.iter().map(|t| t.simple_regret()).collect();
        let cum: Vec<Vec<f64>> = group.iter().map(|t| t.cumulative_regret()).collect();
        let (simple_mean, simple_stderr) = mean_stderr(&simple);
        let (cum_mean, cum_stderr) = mean_stderr(&cum);
        rules.push(RuleAggregate {
            rule: group[0].rule,
            trials: group.len(),
            simple_mean,
            simple_stderr,
            cum_mean,
            cum_stderr,
        });
    }
    Ok(AggregateResult {
        config_fingerprint: fingerprint,
        rules,
        wall_time: None,
    })
}

/// A trial that could not be completed.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub rule: AcquisitionRule,
    pub message: String,
}

/// Theory checks collected along every trajectory of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunChecks {
    pub variance_floor: CheckReport,
    /// From GP-EIMS trajectories.
    pub eta_lemma: Option<EtaLemmaReport>,
    /// From rescaled EI rules.
    pub mean_reference: Option<CheckReport>,
}

impl RunChecks {
    pub fn reports(&self) -> Vec<CheckReport> {
        let mut out = vec![self.variance_floor.clone()];
        if let Some(eta) = &self.eta_lemma {
            out.push(eta.implication.clone());
            out.push(eta.adversarial.clone());
        }
        out.extend(self.mean_reference.clone());
        out
    }

    pub fn violations(&self) -> usize {
        self.reports().iter().map(|r| r.violations).sum()
    }

    fn merge(&mut self, other: RunChecks) {
        self.variance_floor.merge(&other.variance_floor);
        merge_opt(&mut self.eta_lemma, other.eta_lemma, EtaLemmaReport::merge);
        merge_opt(&mut self.mean_reference, other.mean_reference, CheckReport::merge);
    }
}

fn merge_opt<T>(into: &mut Option<T>, other: Option<T>, merge: impl Fn(&mut T, &T)) {
    match (into.as_mut(), other) {
        (Some(a), Some(b)) => merge(a, &b),
        (None, Some(b)) => *into = Some(b),
        _ => {}
    }
}

/// Options that do not change results.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Collect theory checks along the trajectories.
    pub checks: bool,
    /// Write results to the configured output directory.
    pub persist: bool,
}

/// Everything produced by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub aggregate: AggregateResult,
    /// Ordered by trial, then by rule as listed in the config.
    pub traces: Vec<TrialTrace>,
    pub failures: Vec<TrialFailure>,
    pub checks: Option<RunChecks>,
}

impl ExperimentResult {
    /// Traces of one rule, ordered by trial.
    pub fn traces_for(&self, rule: &AcquisitionRule) -> Vec<&TrialTrace> {
        self.traces.iter().filter(|t| &t.rule == rule).collect()
    }
}

fn observed_trial(
    setup: &TrialSetup<'_>,
    delta: f64,
) -> Result<(TrialTrace, RunChecks)> {
    let grid_len = setup.objective.len();
    let records_eta = setup.rule == AcquisitionRule::Eims;
    let rescaled = matches!(setup.rule, AcquisitionRule::EiMuMax { .. });
    let mut floor = VarianceFloorCheck::default();
    let mut eta = if records_eta { Some(EtaLemmaCheck::new(grid_len, delta)?) } else { None };
    let mut mean_ref = rescaled.then(MeanReferenceCheck::default);
    let mut failure = None;
    let trace = run_trial_observed(setup, |s| {
        floor.record(s);
        let r = match (eta.as_mut(), mean_ref.as_mut()) {
            (Some(e), _) => e.record(s),
            (_, Some(m)) => m.record(s),
            _ => Ok(()),
        };
        if let Err(e) = r {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((
        trace,
        RunChecks {
            variance_floor: floor.report(),
            eta_lemma: eta.map(|e| e.report()),
            mean_reference: mean_ref.map(|m| m.report()),
        },
    ))
}

type TrialOutcome = (usize, AcquisitionRule, Result<(TrialTrace, Option<RunChecks>), String>);

fn run_one_trial(config: &ExperimentConfig, grid: &Points, trial: usize, options: RunOptions, fingerprint: &str) -> Vec<TrialOutcome> {
    let objective = match config.objective(grid, trial) {
        Ok(o) => o,
        Err(e) => {
            let msg = format!("objective draw failed: {e}");
            return config.rules.iter().map(|&r| (trial, r, Err(msg.clone()))).collect();
        }
    };
    let noise_var = config.noise_var();
    let sampler = config.sampler(grid.len());
    config
        .rules
        .par_iter()
        .map(|&rule| {
            let setup = TrialSetup {
                rule,
                objective: &objective,
                kernel: &config.kernel,
                noise_var,
                horizon: config.horizon,
                init_count: config.init_count(),
                seed: config.trial_seed(trial),
                sampler,
            };
            let outcome = if options.checks {
                observed_trial(&setup, config.delta).map(|(t, c)| (t, Some(c)))
            } else {
                run_trial(&setup).map(|t| (t, None))
            };
            let outcome = outcome
                .map(|(mut trace, checks)| {
                    trace.trial = trial;
                    trace.config_fingerprint = fingerprint.to_string();
                    (trace, checks)
                })
                .map_err(|e| e.to_string());
            (trial, rule, outcome)
        })
        .collect()
}

/// Runs every rule on every trial. Within a trial all rules share the
/// objective, the initial design and the observation-noise stream.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let grid = make_grid(&config.grid)?;
    let fingerprint = config.fingerprint()?;
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .flat_map_iter(|trial| run_one_trial(config, &grid, trial, options, &fingerprint))
        .collect();

    let mut traces = Vec::new();
    let mut failures = Vec::new();
    let mut checks: Option<RunChecks> = None;
    for (trial, rule, outcome) in outcomes {
        match outcome {
            Ok((trace, c)) => {
                traces.push(trace);
                if let Some(c) = c {
                    match checks.as_mut() {
                        Some(all) => all.merge(c),
                        None => checks = Some(c),
                    }
                }
            }
            Err(e) => {
                log::warn!("trial {trial} ({}) failed: {e}", rule.name());
                failures.push(TrialFailure { trial, rule, message: e });
            }
        }
    }
    let mut aggregate = if traces.is_empty() {
        AggregateResult { config_fingerprint: fingerprint, rules: Vec::new(), wall_time: None }
    } else {
        aggregate(&traces)?
    };
    aggregate.wall_time = Some(start.elapsed().as_secs_f64());
    let result = ExperimentResult {
        config: config.clone(),
        aggregate,
        traces,
        failures,
        checks,
    };
    if options.persist {
        if let Some(dir) = &config.output_dir {
            write_results(&result, dir)?;
        }
    }
    Ok(result)
}

/// Greedy information-gain curve `γ̂_1, ..., γ̂_T` for a configuration.
pub fn information_gain_curve(config: &ExperimentConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let grid = make_grid(&config.grid)?;
    mig_greedy(&config.kernel, &grid, config.horizon, config.noise_var())
}

/// Regret-bound constants with `γ̂_T` filled in, and the resulting bound on
/// the Bayesian cumulative regret after `horizon` rounds.
pub fn regret_bound(config: &ExperimentConfig) -> Result<(BoundConstants, f64)> {
    let gamma = *information_gain_curve(config)?.last().expect("horizon >= 1");
    let size = config.grid.size().unwrap_or(usize::MAX);
    let constants = compute_constants(size, config.noise_var(), config.horizon, config.delta, None)?
        .with_gamma_hat(gamma);
    let bound = bcr_bound(&constants)?;
    Ok((constants, bound))
}
