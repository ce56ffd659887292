//! Acquisition rules: each maps a posterior and a candidate grid to the next
//! query index.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussmath::{
    log_std_normal_cdf, log_tau, mills_ratio, std_normal_cdf, std_normal_pdf, tau,
};
use crate::gp::GpPosterior;
use crate::points::{argmax_first, Points};
use crate::sampling::{path_max, PathSampler};

/// Below this the linear EI values are too close to underflow to rank, and
/// selection switches to `ln EI`.
const LINEAR_EI_FLOOR: f64 = 1e-280;

/// Reference value for the rescaled EI rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanReference {
    /// Maximum of the posterior mean over the whole grid.
    GlobalMean,
    /// Maximum of the posterior mean over the evaluated inputs, 0 when none.
    EvaluatedMean,
}

/// An acquisition strategy together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcquisitionRule {
    /// EI with the maximum of a posterior sample path as reference.
    Eims,
    /// Probability of improvement over the sample-path maximum.
    Pims,
    /// Thompson sampling.
    Ts,
    Ucb,
    /// UCB with a randomly inflated confidence parameter.
    IrgpUcb,
    /// EI over the best observation.
    Ei,
    /// EI with inflated variance over a posterior-mean maximum.
    EiMuMax { reference: MeanReference },
    /// Max-value entropy search.
    Mes { mc_samples: usize },
    /// EI averaged over sampled maxima.
    E3i { mc_samples: usize },
}

impl AcquisitionRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AcquisitionRule::Mes { mc_samples } | AcquisitionRule::E3i { mc_samples }
                if mc_samples == 0 =>
            {
                Err(Error::Config(format!("{}: mc_samples must be at least 1", self.name())))
            }
            _ => Ok(()),
        }
    }

    /// Stable identifier used in file names and seed tags.
    pub fn slug(&self) -> String {
        match *self {
            AcquisitionRule::Eims => "eims".into(),
            AcquisitionRule::Pims => "pims".into(),
            AcquisitionRule::Ts => "ts".into(),
            AcquisitionRule::Ucb => "ucb".into(),
            AcquisitionRule::IrgpUcb => "irgp_ucb".into(),
            AcquisitionRule::Ei => "ei".into(),
            AcquisitionRule::EiMuMax { reference: MeanReference::GlobalMean } => {
                "ei_mu_max".into()
            }
            AcquisitionRule::EiMuMax { reference: MeanReference::EvaluatedMean } => {
                "ei_mu_max_evaluated".into()
            }
            AcquisitionRule::Mes { mc_samples } => format!("mes{mc_samples}"),
            AcquisitionRule::E3i { mc_samples } => format!("e3i{mc_samples}"),
        }
    }

    /// Display name for reports and plots.
    pub fn name(&self) -> String {
        match *self {
            AcquisitionRule::Eims => "GP-EIMS".into(),
            AcquisitionRule::Pims => "GP-PIMS".into(),
            AcquisitionRule::Ts => "GP-TS".into(),
            AcquisitionRule::Ucb => "GP-UCB".into(),
            AcquisitionRule::IrgpUcb => "IRGP-UCB".into(),
            AcquisitionRule::Ei => "GP-EI".into(),
            AcquisitionRule::EiMuMax { reference: MeanReference::GlobalMean } => {
                "GP-EI-mumax".into()
            }
            AcquisitionRule::EiMuMax { reference: MeanReference::EvaluatedMean } => {
                "GP-EI-mumax-evaluated".into()
            }
            AcquisitionRule::Mes { mc_samples } => format!("MES({mc_samples})"),
            AcquisitionRule::E3i { mc_samples } => format!("E3I({mc_samples})"),
        }
    }

    /// Whether the rule consumes random numbers.
    pub fn is_randomized(&self) -> bool {
        !matches!(
            self,
            AcquisitionRule::Ucb | AcquisitionRule::Ei | AcquisitionRule::EiMuMax { .. }
        )
    }
}

/// Outcome of one acquisition step.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRecord {
    /// Grid index of the query.
    pub index: usize,
    pub point: Vec<f64>,
    /// Maximum of the sampled path, for path-based rules.
    pub g_star: Option<f64>,
    /// `(g_star - μ(x)) / σ(x)` at the chosen point.
    pub eta: Option<f64>,
    /// Acquisition value of every grid point.
    pub acq_values: Option<Vec<f64>>,
    /// `β_t`, `ζ_t` or `ν_t`, whichever the rule uses.
    pub schedule_value: Option<f64>,
    /// EI reference value, for EI-type rules.
    pub reference: Option<f64>,
}

impl SelectionRecord {
    fn new(index: usize, grid: &Points) -> Self {
        SelectionRecord {
            index,
            point: grid.row(index).to_vec(),
            g_star: None,
            eta: None,
            acq_values: None,
            schedule_value: None,
            reference: None,
        }
    }
}

/// Inputs shared by all rules for one round.
#[derive(Clone, Copy, Debug)]
pub struct SelectionContext<'a> {
    pub posterior: &'a GpPosterior,
    pub grid: &'a Points,
    /// Acquisition round, starting at 1.
    pub t: usize,
    pub sampler: PathSampler,
}

/// Closed-form expected improvement `E[max(N(mean, sd²) - reference, 0)]`.
pub fn ei_value(mean: f64, sd: f64, reference: f64) -> f64 {
    let gap = mean - reference;
    if sd > 0.0 && gap > 0.0 {
        // τ(c) = c + τ(-c) keeps the small σ-dependent part exact.
        gap + sd * tau(-gap / sd)
    } else if sd > 0.0 {
        sd * tau(gap / sd)
    } else {
        (mean - reference).max(0.0)
    }
}

/// `ln` of [`ei_value`], finite wherever the value is positive in exact
/// arithmetic.
pub fn log_ei_value(mean: f64, sd: f64, reference: f64) -> f64 {
    if sd > 0.0 {
        sd.ln() + log_tau((mean - reference) / sd)
    } else {
        (mean - reference).max(0.0).ln()
    }
}

/// `β_t = 2 ln(|X| t² / √(2π) + 1)`, shared by GP-UCB and the rescaled EI rule.
pub fn ucb_beta(t: usize, domain_size: usize) -> f64 {
    let t = t as f64;
    2.0 * (domain_size as f64 * t * t / (2.0 * std::f64::consts::PI).sqrt() + 1.0).ln()
}

/// `ζ = 2 ln(|X|/2) + Z`, with `Z` exponential of rate 1/2, floored at 0.
pub fn irgp_zeta<R: Rng + ?Sized>(domain_size: usize, rng: &mut R) -> f64 {
    let z: f64 = Exp::new(0.5).expect("valid rate").sample(rng);
    (2.0 * (domain_size as f64 / 2.0).ln() + z).max(0.0)
}

/// Max-value entropy summand `γφ(γ)/(2Φ(γ)) - ln Φ(γ)` with
/// `γ = (g* - μ)/σ`.
pub fn mes_term(gamma: f64) -> f64 {
    if gamma.is_nan() {
        return 0.0;
    }
    if gamma == f64::INFINITY {
        return 0.0;
    }
    let ratio = if gamma >= 0.0 {
        std_normal_pdf(gamma) / std_normal_cdf(gamma)
    } else {
        1.0 / mills_ratio(-gamma)
    };
    let value = 0.5 * gamma * ratio - log_std_normal_cdf(gamma);
    value.max(0.0)
}

fn moments(post: &GpPosterior, grid: &Points) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid.is_empty() {
        return Err(Error::Domain("acquisition over an empty grid".into()));
    }
    let (means, vars) = post.predict_batch(grid)?;
    Ok((means, vars.into_iter().map(f64::sqrt).collect()))
}

/// Argmax of EI values with a fallback to `ln EI` when all values underflow.
/// `log_values` is only evaluated on the fallback path.
fn ei_argmax(values: &[f64], log_values: impl FnOnce() -> Vec<f64>) -> usize {
    let best = argmax_first(values);
    if values[best] > LINEAR_EI_FLOOR {
        best
    } else {
        argmax_first(&log_values())
    }
}

/// Grid index maximizing `EI(μ, σ, reference)`, ties to the lowest index.
pub fn ei_argmax_index(means: &[f64], sds: &[f64], reference: f64) -> usize {
    let values: Vec<f64> = means.iter().zip(sds).map(|(&m, &s)| ei_value(m, s, reference)).collect();
    ei_argmax(&values, || {
        means.iter().zip(sds).map(|(&m, &s)| log_ei_value(m, s, reference)).collect()
    })
}

fn eta(g_star: f64, mean: f64, sd: f64) -> f64 {
    (g_star - mean) / sd
}

fn sample_maxima<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &Points,
    sampler: PathSampler,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(sampler
        .sample_maxima(post, grid, count, rng)?
        .into_iter()
        .map(|(g, _)| g)
        .collect())
}

/// GP-EIMS: EI whose reference is the maximum of one posterior sample path.
/// The posterior variance is used as is.
pub fn select_eims<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &Points,
    sampler: PathSampler,
    rng: &mut R,
) -> Result<SelectionRecord> {
    let (means, sds) = moments(post, grid)?;
    let g_star = sample_maxima(post, grid, sampler, 1, rng)?[0];
    let values: Vec<f64> = means.iter().zip(&sds).map(|(&m, &s)| ei_value(m, s, g_star)).collect();
    let index = ei_argmax(&values, || {
        means.iter().zip(&sds).map(|(&m, &s)| log_ei_value(m, s, g_star)).collect()
    });
    Ok(SelectionRecord {
        g_star: Some(g_star),
        eta: Some(eta(g_star, means[index], sds[index])),
        acq_values: Some(values),
        reference: Some(g_star),
        ..SelectionRecord::new(index, grid)
    })
}

/// GP-PIMS: maximal probability of exceeding the sample-path maximum.
pub fn select_pims<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &Points,
    sampler: PathSampler,
    rng: &mut R,
) -> Result<SelectionRecord> {
    let (means, sds) = moments(post, grid)?;
    let g_star = sample_maxima(post, grid, sampler, 1, rng)?[0];
    let values: Vec<f64> = means.iter().zip(&sds).map(|(&m, &s)| (m - g_star) / s).collect();
    let index = argmax_first(&values);
    Ok(SelectionRecord {
        g_star: Some(g_star),
        eta: Some(eta(g_star, means[index], sds[index])),
        acq_values: Some(values),
        reference: Some(g_star),
        ..SelectionRecord::new(index, grid)
    })
}

/// GP-TS: query the maximizer of one posterior sample path.
pub fn select_ts<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &Points,
    sampler: PathSampler,
    rng: &mut R,
) -> Result<SelectionRecord> {
    if grid.is_empty() {
        return Err(Error::Domain("acquisition over an empty grid".into()));
    }
    let path = sampler.sample(post, grid, 1, rng)?.remove(0);
    let values = path.values_on(grid)?;
    let (g_star, index) = path_max(&path, grid)?;
    Ok(SelectionRecord {
        g_star: Some(g_star),
        acq_values: Some(values),
        ..SelectionRecord::new(index, grid)
    })
}

fn select_confidence_bound(
    post: &GpPosterior,
    grid: &Points,
    beta: f64,
) -> Result<SelectionRecord> {
    let (means, sds) = moments(post, grid)?;
    let root = beta.sqrt();
    let values: Vec<f64> = means.iter().zip(&sds).map(|(&m, &s)| m + root * s).collect();
    let index = argmax_first(&values);
    Ok(SelectionRecord {
        acq_values: Some(values),
        schedule_value: Some(beta),
        ..SelectionRecord::new(index, grid)
    })
}

/// GP-UCB with `β_t = 2 ln(|X| t² / √(2π) + 1)`.
pub fn select_ucb(post: &GpPosterior, grid: &Points, t: usize) -> Result<SelectionRecord> {
    if t == 0 {
        return Err(Error::Domain("acquisition rounds start at t = 1".into()));
    }
    select_confidence_bound(post, grid, ucb_beta(t, grid.len()))
}

/// IRGP-UCB with a freshly drawn `ζ_t`.
pub fn select_irgp_ucb<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &Points,
    rng: &mut R,
) -> Result<SelectionRecord> {
    if grid.is_empty() {
        return Err(Error::Domain("acquisition over an empty grid".into()));
    }
    let zeta = irgp_zeta(grid.len(), rng);
    select_confidence_bound(post, grid, zeta)
}

fn select_ei_with(
    grid: &Points,
    means: &[f64],
    sds: &[f64],
    reference: f64,
) -> SelectionRecord {
    let values: Vec<f64> = means.iter().zip(sds).map(|(&m, &s)| ei_value(m, s, reference)).collect();
    let index = ei_argmax(&values, || {
        means.iter().zip(sds).map(|(&m, &s)| log_ei_value(m, s, reference)).collect()
    });
    SelectionRecord {
        acq_values: Some(values),
        reference: Some(reference),
        ..SelectionRecord::new(index, grid)
    }
}

/// Classic EI over the best observation so far.
pub fn select_ei_classic(post: &GpPosterior, grid: &Points) -> Result<SelectionRecord> {
    let best = post
        .data()
        .y()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if post.data().is_empty() {
        return Err(Error::EmptyHistory);
    }
    let (means, sds) = moments(post, grid)?;
    Ok(select_ei_with(grid, &means, &sds, best))
}

/// Reference value of the rescaled EI rule.
pub fn mean_reference(post: &GpPosterior, grid: &Points, kind: MeanReference) -> Result<f64> {
    let means = match kind {
        MeanReference::GlobalMean => post.predict_batch(grid)?.0,
        MeanReference::EvaluatedMean => {
            if post.data().is_empty() {
                return Ok(0.0);
            }
            post.predict_batch(post.data().x())?.0
        }
    };
    Ok(means.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// EI with standard deviation inflated by `ν_t^{1/2}` over a posterior-mean
/// maximum.
pub fn select_ei_mumax(
    post: &GpPosterior,
    grid: &Points,
    t: usize,
    kind: MeanReference,
) -> Result<SelectionRecord> {
    if t == 0 {
        return Err(Error::Domain("acquisition rounds start at t = 1".into()));
    }
    let (means, sds) = moments(post, grid)?;
    let nu = ucb_beta(t, grid.len());
    let reference = mean_reference(post, grid, kind)?;
    let root = nu.sqrt();
    let scaled: Vec<f64> = sds.iter().map(|s| root * s).collect();
    Ok(SelectionRecord {
        schedule_value: Some(nu),
        ..select_ei_with(grid, &means, &scaled, reference)
    })
}

/// Max-value entropy search with maxima from `mc_samples` sample paths.
pub fn select_mes<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &Points,
    sampler: PathSampler,
    mc_samples: usize,
    rng: &mut R,
) -> Result<SelectionRecord> {
    if mc_samples == 0 {
        return Err(Error::Domain("MES needs at least one sample".into()));
    }
    let (means, sds) = moments(post, grid)?;
    let maxima = sample_maxima(post, grid, sampler, mc_samples, rng)?;
    let values: Vec<f64> = means
        .iter()
        .zip(&sds)
        .map(|(&m, &s)| {
            if s <= 0.0 {
                return 0.0;
            }
            maxima.iter().map(|&g| mes_term((g - m) / s)).sum::<f64>() / mc_samples as f64
        })
        .collect();
    let index = argmax_first(&values);
    Ok(SelectionRecord {
        acq_values: Some(values),
        ..SelectionRecord::new(index, grid)
    })
}

/// E3I: EI averaged over `mc_samples` sampled maxima.
pub fn select_e3i<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &Points,
    sampler: PathSampler,
    mc_samples: usize,
    rng: &mut R,
) -> Result<SelectionRecord> {
    if mc_samples == 0 {
        return Err(Error::Domain("E3I needs at least one sample".into()));
    }
    let (means, sds) = moments(post, grid)?;
    let maxima = sample_maxima(post, grid, sampler, mc_samples, rng)?;
    let n = mc_samples as f64;
    let values: Vec<f64> = means
        .iter()
        .zip(&sds)
        .map(|(&m, &s)| maxima.iter().map(|&g| ei_value(m, s, g)).sum::<f64>() / n)
        .collect();
    let index = ei_argmax(&values, || {
        means
            .iter()
            .zip(&sds)
            .map(|(&m, &s)| {
                let logs: Vec<f64> = maxima.iter().map(|&g| log_ei_value(m, s, g)).collect();
                log_sum_exp(&logs) - n.ln()
            })
            .collect()
    });
    let record = SelectionRecord {
        acq_values: Some(values),
        ..SelectionRecord::new(index, grid)
    };
    if mc_samples == 1 {
        let g_star = maxima[0];
        return Ok(SelectionRecord {
            g_star: Some(g_star),
            eta: Some(eta(g_star, means[index], sds[index])),
            reference: Some(g_star),
            ..record
        });
    }
    Ok(record)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Runs `rule` for one round.
pub fn select<R: Rng + ?Sized>(
    rule: &AcquisitionRule,
    ctx: &SelectionContext<'_>,
    rng: &mut R,
) -> Result<SelectionRecord> {
    let (post, grid) = (ctx.posterior, ctx.grid);
    match *rule {
        AcquisitionRule::Eims => select_eims(post, grid, ctx.sampler, rng),
        AcquisitionRule::Pims => select_pims(post, grid, ctx.sampler, rng),
        AcquisitionRule::Ts => select_ts(post, grid, ctx.sampler, rng),
        AcquisitionRule::Ucb => select_ucb(post, grid, ctx.t),
        AcquisitionRule::IrgpUcb => select_irgp_ucb(post, grid, rng),
        AcquisitionRule::Ei => select_ei_classic(post, grid),
        AcquisitionRule::EiMuMax { reference } => select_ei_mumax(post, grid, ctx.t, reference),
        AcquisitionRule::Mes { mc_samples } => select_mes(post, grid, ctx.sampler, mc_samples, rng),
        AcquisitionRule::E3i { mc_samples } => select_e3i(post, grid, ctx.sampler, mc_samples, rng),
    }
}
