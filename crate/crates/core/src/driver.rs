//! Sequential Bayesian-optimization loop: initial design, acquisition
//! rounds, noisy observations and regret bookkeeping.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::acquisitions::{select, AcquisitionRule, SelectionContext, SelectionRecord};
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpPosterior};
use crate::kernels::KernelSpec;
use crate::points::{argmax_first, Points};
use crate::sampling::{snap_to_grid, sobol_init, PathSampler};
use crate::seeds;

/// How an objective's values were generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveSampling {
    /// Joint Gaussian draw on the grid.
    Exact,
    /// Random Fourier feature prior path with the given feature count.
    Fourier { features: usize },
    /// Values supplied by the caller.
    Given,
}

/// Ground truth on a finite grid. Acquisition rules never see `values`;
/// only noisy observations leave this type during a trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    grid: Points,
    values: Vec<f64>,
    f_star: f64,
    argmax: usize,
    sampling: ObjectiveSampling,
}

impl Objective {
    pub fn new(grid: Points, values: Vec<f64>) -> Result<Self> {
        Self::with_sampling(grid, values, ObjectiveSampling::Given)
    }

    pub(crate) fn with_sampling(
        grid: Points,
        values: Vec<f64>,
        sampling: ObjectiveSampling,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Domain("objective over an empty grid".into()));
        }
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("objective values must be finite".into()));
        }
        let argmax = argmax_first(&values);
        Ok(Objective {
            f_star: values[argmax],
            argmax,
            grid,
            values,
            sampling,
        })
    }

    pub fn grid(&self) -> &Points {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn argmax_index(&self) -> usize {
        self.argmax
    }

    pub fn sampling(&self) -> ObjectiveSampling {
        self.sampling
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Noisy evaluation `f(x_index) + noise_sd · ε`.
    pub fn observe<R: Rng + ?Sized>(&self, index: usize, noise_sd: f64, rng: &mut R) -> Result<f64> {
        let f = *self.values.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.values.len(),
        })?;
        if !(noise_sd > 0.0) {
            return Err(Error::Domain(format!("noise sd must be positive, got {noise_sd}")));
        }
        let eps: f64 = StandardNormal.sample(rng);
        Ok(f + noise_sd * eps)
    }

    /// SHA-256 of the grid and values, as lowercase hex.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.grid.dim() as u64).to_le_bytes());
        for v in self.grid.as_slice().iter().chain(&self.values) {
            h.update(v.to_le_bytes());
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One acquisition round of a trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub x_index: usize,
    pub y: f64,
    pub f: f64,
    pub g_star: Option<f64>,
    pub eta: Option<f64>,
    pub schedule_value: Option<f64>,
    pub simple_regret: f64,
    pub cum_regret: f64,
}

/// Full record of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialTrace {
    pub rule: AcquisitionRule,
    pub trial: usize,
    pub seed: u64,
    pub config_fingerprint: String,
    pub objective_fingerprint: String,
    /// Grid indices of the initial design, observed before round 1 and
    /// excluded from cumulative regret.
    pub init_indices: Vec<usize>,
    pub rows: Vec<TraceRow>,
}

impl TrialTrace {
    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn simple_regret(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.simple_regret).collect()
    }

    pub fn cumulative_regret(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cum_regret).collect()
    }
}

/// State of one round, handed to observers before the query is evaluated.
#[derive(Debug)]
pub struct RoundSnapshot<'a> {
    pub t: usize,
    /// Observations in the dataset the posterior was fitted on.
    pub n_obs: usize,
    pub noise_var: f64,
    /// Posterior means on the grid.
    pub means: &'a [f64],
    /// Posterior variances on the grid.
    pub variances: &'a [f64],
    pub selection: &'a SelectionRecord,
}

/// Everything `run_trial` needs.
#[derive(Clone, Copy, Debug)]
pub struct TrialSetup<'a> {
    pub rule: AcquisitionRule,
    pub objective: &'a Objective,
    pub kernel: &'a KernelSpec,
    pub noise_var: f64,
    pub horizon: usize,
    pub init_count: usize,
    /// Trial seed; the init, noise and acquisition streams derive from it.
    pub seed: u64,
    pub sampler: PathSampler,
}

/// Grid index of the posterior-mean maximizer.
pub fn recommend(post: &GpPosterior, grid: &Points) -> Result<usize> {
    if grid.is_empty() {
        return Err(Error::Domain("recommendation over an empty grid".into()));
    }
    let (means, _) = post.predict_batch(grid)?;
    Ok(argmax_first(&means))
}

/// Initial design indices for a trial seed.
pub fn initial_design(grid: &Points, init_count: usize, seed: u64) -> Result<Vec<usize>> {
    if init_count == 0 {
        return Ok(Vec::new());
    }
    if init_count > grid.len() {
        return Err(Error::Config(format!(
            "init_count {init_count} exceeds grid size {}",
            grid.len()
        )));
    }
    let design = sobol_init(grid.dim(), init_count, Some(seeds::derive(seed, "init")))?;
    snap_to_grid(&design, grid)
}

/// Runs one trial.
pub fn run_trial(setup: &TrialSetup<'_>) -> Result<TrialTrace> {
    run_trial_inner(setup, None)
}

/// Runs one trial, calling `observer` once per round with the posterior
/// state the acquisition saw.
pub fn run_trial_observed(
    setup: &TrialSetup<'_>,
    mut observer: impl FnMut(&RoundSnapshot<'_>),
) -> Result<TrialTrace> {
    run_trial_inner(setup, Some(&mut observer))
}

fn run_trial_inner(
    setup: &TrialSetup<'_>,
    mut observer: Option<&mut dyn FnMut(&RoundSnapshot<'_>)>,
) -> Result<TrialTrace> {
    setup.rule.validate()?;
    if setup.horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if !(setup.noise_var > 0.0) {
        return Err(Error::Config("noise variance must be positive".into()));
    }
    if matches!(setup.rule, AcquisitionRule::Ei) && setup.init_count == 0 {
        return Err(Error::EmptyHistory);
    }
    let obj = setup.objective;
    let grid = obj.grid();
    let noise_sd = setup.noise_var.sqrt();
    let mut noise_rng = seeds::rng(seeds::derive(setup.seed, "noise"));
    let mut acq_rng = seeds::rng(seeds::derive(
        setup.seed,
        &format!("acquisition/{}", setup.rule.slug()),
    ));

    let init_indices = initial_design(grid, setup.init_count, setup.seed)?;
    let mut data = Dataset::empty(grid.dim());
    for &i in &init_indices {
        let y = obj.observe(i, noise_sd, &mut noise_rng)?;
        data.push(grid.row(i), y)?;
    }
    let mut post = GpPosterior::fit(setup.kernel.clone(), data, setup.noise_var)?;

    let mut rows = Vec::with_capacity(setup.horizon);
    let mut cum = 0.0;
    for t in 1..=setup.horizon {
        let ctx = SelectionContext {
            posterior: &post,
            grid,
            t,
            sampler: setup.sampler,
        };
        let record = select(&setup.rule, &ctx, &mut acq_rng)?;
        if let Some(observer) = observer.as_mut() {
            let (means, variances) = post.predict_batch(grid)?;
            observer(&RoundSnapshot {
                t,
                n_obs: post.len(),
                noise_var: setup.noise_var,
                means: &means,
                variances: &variances,
                selection: &record,
            });
        }
        let i = record.index;
        let y = obj.observe(i, noise_sd, &mut noise_rng)?;
        post = post.extend(grid.row(i), y)?;
        let f = obj.values()[i];
        cum += obj.f_star() - f;
        let rec = recommend(&post, grid)?;
        rows.push(TraceRow {
            t,
            x_index: i,
            y,
            f,
            g_star: record.g_star,
            eta: record.eta,
            schedule_value: record.schedule_value,
            simple_regret: obj.f_star() - obj.values()[rec],
            cum_regret: cum,
        });
    }

    Ok(TrialTrace {
        rule: setup.rule,
        trial: 0,
        seed: setup.seed,
        config_fingerprint: String::new(),
        objective_fingerprint: obj.fingerprint(),
        init_indices,
        rows,
    })
}
