//! Regret-bound constants and numerical checks of the inequalities behind
//! them.

use rand::Rng;
use serde::Serialize;

use crate::acquisitions::{ei_argmax_index, ei_value, AcquisitionRule, MeanReference};
use crate::driver::{run_trial_observed, RoundSnapshot, TrialSetup};
use crate::error::{Error, Result};
use crate::gaussmath::{scan_q_bound, scan_tau_lower_bound, tau, InequalityScan};
use crate::gp::GpPosterior;
use crate::kernels::KernelSpec;
use crate::linalg::cholesky_lower;
use crate::points::{argmax_first, Points};
use crate::sampling::PathSampler;
use crate::seeds;
use crate::synthetic::{make_grid, sample_objective, GridSpec};

/// Absolute slack allowed by the posterior-variance floor check.
pub const VARIANCE_FLOOR_SLACK: f64 = 1e-9;
/// Relative slack for checks comparing two computed quantities.
const REL_SLACK: f64 = 1e-10;

/// Constants of Assumption-style continuity conditions on `[0, r]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContinuousParams {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub d: usize,
}

/// Continuous-domain discretization constants at horizon `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContinuousConstants {
    pub m_t: u64,
    pub c_t: f64,
    pub beta_t: f64,
    pub b_t: f64,
}

/// Constants entering the Bayesian cumulative regret bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundConstants {
    pub horizon: usize,
    pub noise_var: f64,
    pub domain_size: usize,
    pub delta: f64,
    pub c1: f64,
    pub beta_delta: f64,
    pub c2: f64,
    pub b_t: f64,
    pub continuous: Option<ContinuousConstants>,
    /// Greedy information-gain estimate, when computed.
    pub gamma_hat: Option<f64>,
}

impl BoundConstants {
    pub fn with_gamma_hat(mut self, gamma_hat: f64) -> Self {
        self.gamma_hat = Some(gamma_hat);
        self
    }
}

fn check_noise(noise_var: f64) -> Result<()> {
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::Domain(format!("noise variance must be positive, got {noise_var}")));
    }
    Ok(())
}

/// `C1 = 2 / ln(1 + σ⁻²)`.
pub fn c1(noise_var: f64) -> Result<f64> {
    check_noise(noise_var)?;
    Ok(2.0 / (1.0 / noise_var).ln_1p())
}

/// `β(δ) = 2 ln(|X| / (2δ))`.
pub fn beta_delta(domain_size: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if domain_size == 0 {
        return Err(Error::Domain("domain must be nonempty".into()));
    }
    Ok(2.0 * (domain_size as f64 / (2.0 * delta)).ln())
}

/// `C2 = 2 + 2 ln(|X| / 2)`.
pub fn c2(domain_size: usize) -> Result<f64> {
    if domain_size < 2 {
        return Err(Error::Domain("discrete constants need |X| >= 2".into()));
    }
    Ok(2.0 + 2.0 * (domain_size as f64 / 2.0).ln())
}

/// `ln((σ² + T − 1)/σ²) + c + √(2πc)`.
fn b_t_with(horizon: usize, noise_var: f64, c: f64) -> f64 {
    let t = horizon as f64;
    ((noise_var + t - 1.0) / noise_var).ln() + c + (2.0 * std::f64::consts::PI * c).sqrt()
}

/// `m_t = max{2, ⌈b d r √((σ² + t − 1) ln(2ad) / σ²)⌉}`.
pub fn discretization_size(t: usize, noise_var: f64, p: &ContinuousParams) -> Result<u64> {
    check_continuous(p)?;
    check_noise(noise_var)?;
    if t == 0 {
        return Err(Error::Domain("t must be at least 1".into()));
    }
    let d = p.d as f64;
    let inner = (noise_var + t as f64 - 1.0) * (2.0 * p.a * d).ln() / noise_var;
    let m = (p.b * d * p.r * inner.sqrt()).ceil();
    Ok((m as u64).max(2))
}

/// `β_t(δ) = 2d ln m_t − 2 ln(2δ)`.
pub fn continuous_beta(t: usize, noise_var: f64, delta: f64, p: &ContinuousParams) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let m = discretization_size(t, noise_var, p)? as f64;
    Ok(2.0 * p.d as f64 * m.ln() - 2.0 * (2.0 * delta).ln())
}

fn check_continuous(p: &ContinuousParams) -> Result<()> {
    if !(p.a >= 1.0 && p.b > 0.0 && p.r > 0.0 && p.d >= 1) {
        return Err(Error::Domain(
            "continuous constants need a >= 1, b > 0, r > 0, d >= 1".into(),
        ));
    }
    Ok(())
}

/// All bound constants for one configuration.
pub fn compute_constants(
    domain_size: usize,
    noise_var: f64,
    horizon: usize,
    delta: f64,
    continuous: Option<ContinuousParams>,
) -> Result<BoundConstants> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let c2 = c2(domain_size)?;
    let continuous = match continuous {
        Some(p) => {
            let m_t = discretization_size(horizon, noise_var, &p)?;
            let c_t = 8.0 * (p.d as f64 * (m_t as f64).ln() + 1.0);
            Some(ContinuousConstants {
                m_t,
                c_t,
                beta_t: continuous_beta(horizon, noise_var, delta, &p)?,
                b_t: b_t_with(horizon, noise_var, c_t),
            })
        }
        None => None,
    };
    Ok(BoundConstants {
        horizon,
        noise_var,
        domain_size,
        delta,
        c1: c1(noise_var)?,
        beta_delta: beta_delta(domain_size, delta)?,
        c2,
        b_t: b_t_with(horizon, noise_var, c2),
        continuous,
        gamma_hat: None,
    })
}

/// `√(C1 · B_T · T · γ̂)`.
pub fn bcr_bound(constants: &BoundConstants) -> Result<f64> {
    let gamma = constants
        .gamma_hat
        .ok_or_else(|| Error::Domain("bcr_bound needs an information-gain estimate".into()))?;
    Ok((constants.c1 * constants.b_t * constants.horizon as f64 * gamma).sqrt())
}

/// `√(ln((σ² + t − 1)/σ²) + β + √(2πβ))`.
pub fn eta_bound(t: usize, noise_var: f64, beta: f64) -> Result<f64> {
    check_noise(noise_var)?;
    if t == 0 || !(beta >= 0.0) {
        return Err(Error::Domain("eta_bound needs t >= 1 and beta >= 0".into()));
    }
    Ok(b_t_with(t, noise_var, beta).sqrt())
}

/// Outcome of one numerical check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    /// What the check verifies.
    pub source: String,
    pub cases: usize,
    pub violations: usize,
    /// Smallest `bound − value` over all cases; negative on violation.
    pub worst_margin: f64,
}

impl CheckReport {
    fn new(name: &str, source: &str) -> Self {
        CheckReport {
            name: name.into(),
            source: source.into(),
            cases: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        }
    }

    fn from_scan(name: &str, source: &str, scan: InequalityScan) -> Self {
        CheckReport {
            cases: scan.cases,
            violations: scan.violations,
            worst_margin: scan.worst_margin,
            ..CheckReport::new(name, source)
        }
    }

    /// Records `value ≤ bound` with absolute slack `slack`.
    fn record(&mut self, value: f64, bound: f64, slack: f64) {
        self.cases += 1;
        let margin = bound - value;
        if !(margin >= -slack) {
            self.violations += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Folds another report of the same check into this one.
    pub fn merge(&mut self, other: &CheckReport) {
        self.cases += other.cases;
        self.violations += other.violations;
        if other.worst_margin < self.worst_margin || other.worst_margin.is_nan() {
            self.worst_margin = other.worst_margin;
        }
    }
}

fn rel_slack(scale: f64) -> f64 {
    REL_SLACK * scale.abs().max(1.0)
}

/// Checks the standardized-gap implication round by round: whenever
/// `g* ≤ max(μ + β(δ)^{1/2} σ)`, `η ≤ eta_bound(n + 1, σ², β(δ))` where `n`
/// is the number of observations behind the posterior.
#[derive(Clone, Debug)]
pub struct EtaLemmaCheck {
    beta: f64,
    rounds: usize,
    events: usize,
    report: CheckReport,
    adversarial: CheckReport,
}

/// Summary of an [`EtaLemmaCheck`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaLemmaReport {
    pub rounds: usize,
    /// Rounds where the sampled maximum is below the confidence bound.
    pub events: usize,
    pub implication: CheckReport,
    /// The same bound with the reference set to the confidence-bound maximum.
    pub adversarial: CheckReport,
}

impl EtaLemmaReport {
    pub fn merge(&mut self, other: &EtaLemmaReport) {
        self.rounds += other.rounds;
        self.events += other.events;
        self.implication.merge(&other.implication);
        self.adversarial.merge(&other.adversarial);
    }

    pub fn event_frequency(&self) -> f64 {
        if self.rounds == 0 {
            return 1.0;
        }
        self.events as f64 / self.rounds as f64
    }
}

impl EtaLemmaCheck {
    pub fn new(domain_size: usize, delta: f64) -> Result<Self> {
        Ok(EtaLemmaCheck {
            beta: beta_delta(domain_size, delta)?,
            rounds: 0,
            events: 0,
            report: CheckReport::new("eta_lemma", "standardized gap bound under the confidence event"),
            adversarial: CheckReport::new(
                "eta_lemma_boundary",
                "standardized gap bound with reference at the confidence-bound maximum",
            ),
        })
    }

    pub fn record(&mut self, s: &RoundSnapshot<'_>) -> Result<()> {
        let (g_star, eta) = match (s.selection.g_star, s.selection.eta) {
            (Some(g), Some(e)) => (g, e),
            _ => {
                return Err(Error::Domain(
                    "eta check needs a rule that records g* and eta".into(),
                ))
            }
        };
        self.record_parts(s.n_obs, s.noise_var, s.means, s.variances, g_star, eta)
    }

    /// Same as [`record`](Self::record) from raw parts.
    pub fn record_parts(
        &mut self,
        n_obs: usize,
        noise_var: f64,
        means: &[f64],
        variances: &[f64],
        g_star: f64,
        eta: f64,
    ) -> Result<()> {
        let root = self.beta.sqrt();
        let sds: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
        let ucb = means
            .iter()
            .zip(&sds)
            .map(|(m, s)| m + root * s)
            .fold(f64::NEG_INFINITY, f64::max);
        let bound = eta_bound(n_obs + 1, noise_var, self.beta)?;
        self.rounds += 1;
        if g_star <= ucb {
            self.events += 1;
            self.report.record(eta, bound, rel_slack(bound));
        }
        let i = ei_argmax_index(means, &sds, ucb);
        self.adversarial.record((ucb - means[i]) / sds[i], bound, rel_slack(bound));
        Ok(())
    }

    pub fn report(&self) -> EtaLemmaReport {
        EtaLemmaReport {
            rounds: self.rounds,
            events: self.events,
            implication: self.report.clone(),
            adversarial: self.adversarial.clone(),
        }
    }
}

/// `σ²_n(x) ≥ σ²/(σ² + n)` for kernels with `k(x, x) ≤ 1`.
pub fn variance_floor(n_obs: usize, noise_var: f64) -> f64 {
    noise_var / (noise_var + n_obs as f64)
}

/// Accumulates posterior-variance floor checks.
#[derive(Clone, Debug)]
pub struct VarianceFloorCheck {
    report: CheckReport,
}

impl Default for VarianceFloorCheck {
    fn default() -> Self {
        VarianceFloorCheck {
            report: CheckReport::new("variance_floor", "posterior variance lower bound"),
        }
    }
}

impl VarianceFloorCheck {
    pub fn record(&mut self, s: &RoundSnapshot<'_>) {
        self.record_variances(s.n_obs, s.noise_var, s.variances);
    }

    pub fn record_variances(&mut self, n_obs: usize, noise_var: f64, variances: &[f64]) {
        let floor = variance_floor(n_obs, noise_var);
        for &v in variances {
            // value ≤ bound is "floor ≤ v"
            self.report.record(floor, v, VARIANCE_FLOOR_SLACK);
        }
    }

    /// Checks a posterior at arbitrary probe points.
    pub fn record_posterior(&mut self, post: &GpPosterior, probes: &Points) -> Result<()> {
        let (_, vars) = post.predict_batch(probes)?;
        self.record_variances(post.len(), post.noise_var(), &vars);
        Ok(())
    }

    pub fn report(&self) -> CheckReport {
        self.report.clone()
    }
}

/// Checks `b − μ(x_t) ≤ √(ln((n + σ²)/σ²)) ν^{1/2} σ(x_t)` along rescaled
/// EI trajectories, at rounds where `min μ ≤ b ≤ max μ`.
#[derive(Clone, Debug)]
pub struct MeanReferenceCheck {
    report: CheckReport,
    skipped: usize,
}

impl Default for MeanReferenceCheck {
    fn default() -> Self {
        MeanReferenceCheck {
            report: CheckReport::new("mean_reference", "reference-minus-mean bound for rescaled EI"),
            skipped: 0,
        }
    }
}

impl MeanReferenceCheck {
    pub fn record(&mut self, s: &RoundSnapshot<'_>) -> Result<()> {
        let (b, nu) = match (s.selection.reference, s.selection.schedule_value) {
            (Some(b), Some(nu)) => (b, nu),
            _ => return Err(Error::Domain("mean-reference check needs a rescaled EI rule".into())),
        };
        let lo = s.means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if b < lo || b > hi {
            self.skipped += 1;
            return Ok(());
        }
        let i = s.selection.index;
        let n = s.n_obs as f64;
        let bound = ((n + s.noise_var) / s.noise_var).ln().sqrt() * nu.sqrt() * s.variances[i].sqrt();
        self.report.record(b - s.means[i], bound, rel_slack(b));
        Ok(())
    }

    /// Rounds outside the lemma's hypothesis on `b`.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn report(&self) -> CheckReport {
        self.report.clone()
    }
}

/// Lower and upper EI bounds under `|a − μ| ≤ β^{1/2} σ` on `cases` random
/// tuples `(a, b, μ, σ, β, ν)`.
pub fn check_ei_sandwich<R: Rng + ?Sized>(cases: usize, rng: &mut R) -> CheckReport {
    let mut report = CheckReport::new("ei_sandwich", "rescaled EI lower and upper bounds");
    for _ in 0..cases {
        let mu = rng.random_range(-3.0..3.0);
        let sigma: f64 = rng.random_range(1e-3..2.0);
        let beta: f64 = rng.random_range(1e-3..25.0);
        let nu: f64 = rng.random_range(1e-2..25.0);
        let a = mu + rng.random_range(-1.0..=1.0) * beta.sqrt() * sigma;
        let b = rng.random_range(-4.0..4.0);
        let ei = ei_value(mu, nu.sqrt() * sigma, b);
        let gap = (a - b).max(0.0);
        let r = beta.sqrt() / nu.sqrt();
        let lower = (gap - beta.sqrt() * sigma).max(tau(-r) / tau(r) * gap);
        let upper = gap + (beta.sqrt() + nu.sqrt()) * sigma;
        let slack = rel_slack(upper);
        report.record(lower, ei, slack);
        // Two cases per tuple: lower ≤ EI and EI ≤ upper.
        report.record(ei, upper, slack);
    }
    report
}

/// Probe-variance series for a learner that always queries one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleSeries {
    /// `k(x̃, x̃) − k(x, x̃)² / k(x, x)`.
    pub c: f64,
    /// `σ_t²(x̃)` for `t = 1..=T`.
    pub increments: Vec<f64>,
    /// Prefix sums of `increments`.
    pub prefix: Vec<f64>,
}

impl CounterexampleSeries {
    /// `S(T) / S(T/2)`.
    pub fn doubling_ratio(&self) -> f64 {
        let t = self.prefix.len();
        self.prefix[t - 1] / self.prefix[t / 2 - 1]
    }

    /// Whether every increment is at least `c − tol`.
    pub fn is_linear(&self, tol: f64) -> bool {
        self.increments.iter().all(|&v| v >= self.c - tol)
    }
}

/// Conditions `T` times on the query point and records the posterior
/// variance at the probe after each step.
pub fn counterexample_constant_query(
    kernel: &KernelSpec,
    grid: &Points,
    query_index: usize,
    probe_index: usize,
    noise_var: f64,
    horizon: usize,
) -> Result<CounterexampleSeries> {
    for &i in &[query_index, probe_index] {
        if i >= grid.len() {
            return Err(Error::IndexOutOfRange { index: i, len: grid.len() });
        }
    }
    if horizon < 2 {
        return Err(Error::Domain("counterexample needs T >= 2".into()));
    }
    let x = grid.row(query_index);
    let probe = grid.row(probe_index);
    let kxx = kernel.eval(x, x)?;
    let kxp = kernel.eval(x, probe)?;
    let c = kernel.eval(probe, probe)? - kxp * kxp / kxx;
    let mut post = GpPosterior::prior(kernel.clone(), noise_var)?;
    let mut increments = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        post = post.extend(x, 0.0)?;
        increments.push(post.predict(probe)?.1);
    }
    let prefix = increments
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    Ok(CounterexampleSeries { c, increments, prefix })
}

/// Greedy maximum-variance information gain: entry `t − 1` is the gain of
/// the first `t` greedy picks, a lower bound on `γ_t`.
pub fn mig_greedy(kernel: &KernelSpec, grid: &Points, horizon: usize, noise_var: f64) -> Result<Vec<f64>> {
    check_noise(noise_var)?;
    if grid.is_empty() {
        return Err(Error::Domain("information gain over an empty grid".into()));
    }
    let m = grid.len();
    let mut vars: Vec<f64> = grid.rows().map(|x| kernel.eval_unchecked(x, x)).collect();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut gains = Vec::with_capacity(horizon);
    let mut total = 0.0;
    for _ in 0..horizon {
        let s = argmax_first(&vars);
        let vs = vars[s].max(0.0);
        total += 0.5 * (vs / noise_var).ln_1p();
        gains.push(total);
        let xs = grid.row(s);
        let scale = (vs + noise_var).sqrt();
        let col: Vec<f64> = (0..m)
            .map(|j| {
                let prior = kernel.eval_unchecked(grid.row(j), xs);
                let explained: f64 = columns.iter().map(|u| u[j] * u[s]).sum();
                (prior - explained) / scale
            })
            .collect();
        for (v, u) in vars.iter_mut().zip(&col) {
            *v = (*v - u * u).max(0.0);
        }
        columns.push(col);
    }
    Ok(gains)
}

/// `½ ln det(I + σ⁻² K_A)` for the multiset `A` of grid indices.
pub fn information_gain(kernel: &KernelSpec, grid: &Points, indices: &[usize], noise_var: f64) -> Result<f64> {
    check_noise(noise_var)?;
    let pts = grid.select(indices)?;
    let mut k = kernel.matrix(&pts)? / noise_var;
    for i in 0..indices.len() {
        k[(i, i)] += 1.0;
    }
    let l = cholesky_lower(k).ok_or_else(|| Error::Factorization("I + K/σ² in information gain".into()))?;
    Ok((0..indices.len()).map(|i| l[(i, i)].ln()).sum())
}

/// Largest grid accepted by [`mig_exhaustive`].
pub const EXHAUSTIVE_MAX_GRID: usize = 12;
/// Largest horizon accepted by [`mig_exhaustive`].
pub const EXHAUSTIVE_MAX_T: usize = 4;

/// Exact `γ_T` over all size-`T` multisets of grid points.
pub fn mig_exhaustive(kernel: &KernelSpec, grid: &Points, horizon: usize, noise_var: f64) -> Result<f64> {
    if grid.len() > EXHAUSTIVE_MAX_GRID || horizon > EXHAUSTIVE_MAX_T || horizon == 0 || grid.is_empty() {
        return Err(Error::Capacity(format!(
            "exhaustive information gain is limited to 1..={EXHAUSTIVE_MAX_GRID} points and T in 1..={EXHAUSTIVE_MAX_T}"
        )));
    }
    let m = grid.len();
    let mut idx = vec![0usize; horizon];
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(information_gain(kernel, grid, &idx, noise_var)?);
        // Next nondecreasing index sequence.
        let mut k = horizon;
        while k > 0 && idx[k - 1] == m - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        idx[k - 1] += 1;
        let v = idx[k - 1];
        for slot in idx.iter_mut().skip(k) {
            *slot = v;
        }
    }
    Ok(best)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.6276 * ((n + m) / (n * m)).sqrt()
}

/// Settings of the run-based checks in [`verify`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifySettings {
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    pub delta: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            trials: 4,
            horizon: 50,
            seed: 0,
            delta: 0.05,
        }
    }
}

/// Names accepted by [`verify`].
pub const CHECK_NAMES: &[&str] = &[
    "q_bound",
    "tau_lower_bound",
    "ei_sandwich",
    "counterexample",
    "mig",
    "eta_lemma",
    "variance_floor",
    "mean_reference",
];

/// Runs the check battery, or only the check called `only`.
pub fn verify(settings: &VerifySettings, only: Option<&str>) -> Result<Vec<CheckReport>> {
    if let Some(name) = only {
        if !CHECK_NAMES.contains(&name) {
            return Err(Error::Config(format!(
                "unknown check {name:?}; expected one of {}",
                CHECK_NAMES.join(", ")
            )));
        }
    }
    let wanted = |name: &str| only.is_none_or(|o| o == name);
    let mut out = Vec::new();
    if wanted("q_bound") {
        out.push(CheckReport::from_scan("q_bound", "Gaussian tail bound on (0, 10]", scan_q_bound(10.0, 10_000)));
    }
    if wanted("tau_lower_bound") {
        out.push(CheckReport::from_scan(
            "tau_lower_bound",
            "lower bound on tau at negative root on (0, 40]",
            scan_tau_lower_bound(40.0, 10_000),
        ));
    }
    if wanted("ei_sandwich") {
        let mut rng = seeds::rng(seeds::derive(settings.seed, "verify/ei_sandwich"));
        out.push(check_ei_sandwich(10_000, &mut rng));
    }
    if wanted("counterexample") {
        out.push(counterexample_report()?);
    }
    if wanted("mig") {
        out.push(mig_report(settings.seed)?);
    }
    let runs = ["eta_lemma", "variance_floor", "mean_reference"];
    if runs.iter().any(|n| wanted(n)) {
        out.extend(
            desk_run_checks(settings)?
                .into_iter()
                .filter(|r| wanted(&r.name) || (r.name == "eta_lemma_boundary" && wanted("eta_lemma"))),
        );
    }
    Ok(out)
}

fn counterexample_report() -> Result<CheckReport> {
    let kernel = KernelSpec::squared_exponential(0.1, 1)?;
    let grid = Points::from_rows(&[[0.0], [1.0]])?;
    let series = counterexample_constant_query(&kernel, &grid, 0, 1, 0.01, 200)?;
    let mut report = CheckReport::new(
        "counterexample",
        "probe variance stays above C under a constant query",
    );
    for &v in &series.increments {
        report.record(series.c, v, 1e-9);
    }
    Ok(report)
}

fn mig_report(seed: u64) -> Result<CheckReport> {
    let mut rng = seeds::rng(seeds::derive(seed, "verify/mig"));
    let mut report = CheckReport::new("mig", "greedy information gain within (1 - 1/e) of exhaustive");
    for _ in 0..20 {
        let (kernel, grid, t, noise) = random_mig_case(&mut rng)?;
        let greedy = *mig_greedy(&kernel, &grid, t, noise)?.last().expect("t >= 1");
        let exact = mig_exhaustive(&kernel, &grid, t, noise)?;
        report.record(greedy, exact, rel_slack(exact));
        report.record((1.0 - (-1.0f64).exp()) * exact, greedy, rel_slack(exact));
    }
    Ok(report)
}

/// A random small instance for greedy-versus-exhaustive comparisons.
pub fn random_mig_case<R: Rng + ?Sized>(rng: &mut R) -> Result<(KernelSpec, Points, usize, f64)> {
    use crate::kernels::{KernelFamily, MaternNu};
    let d = rng.random_range(1..=2);
    let m = rng.random_range(3..=EXHAUSTIVE_MAX_GRID);
    let t = rng.random_range(1..=EXHAUSTIVE_MAX_T);
    let family = match rng.random_range(0..4) {
        0 => KernelFamily::SquaredExponential,
        1 => KernelFamily::Matern { nu: MaternNu::Half },
        2 => KernelFamily::Matern { nu: MaternNu::ThreeHalves },
        _ => KernelFamily::Matern { nu: MaternNu::FiveHalves },
    };
    let ls = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
    let kernel = KernelSpec::new(family, ls)?;
    let grid = Points::new(d, (0..m * d).map(|_| rng.random::<f64>()).collect())?;
    let noise = 10f64.powf(rng.random_range(-2.0..0.0));
    Ok((kernel, grid, t, noise))
}

/// Settings of the small desk problem used by the run-based checks.
fn desk_problem() -> Result<(KernelSpec, Points, f64)> {
    let grid = make_grid(&GridSpec::uniform(2, 20, 0.05))?;
    Ok((KernelSpec::squared_exponential(0.2, 2)?, grid, 0.01))
}

fn desk_run_checks(settings: &VerifySettings) -> Result<Vec<CheckReport>> {
    let (kernel, grid, noise_var) = desk_problem()?;
    let mut eta = EtaLemmaCheck::new(grid.len(), settings.delta)?;
    let mut floor = VarianceFloorCheck::default();
    let mut mean_ref = MeanReferenceCheck::default();
    let mut failure = None;
    for trial in 0..settings.trials {
        let seed = seeds::derive_indexed(settings.seed, "verify/trial", trial as u64);
        let objective = sample_objective(&kernel, &grid, &mut seeds::rng(seeds::derive(seed, "objective")))?;
        let rules = [
            AcquisitionRule::Eims,
            AcquisitionRule::EiMuMax { reference: MeanReference::GlobalMean },
        ];
        for rule in rules {
            let setup = TrialSetup {
                rule,
                objective: &objective,
                kernel: &kernel,
                noise_var,
                horizon: settings.horizon,
                init_count: 4,
                seed,
                sampler: PathSampler::Exact,
            };
            run_trial_observed(&setup, |s| {
                floor.record(s);
                let r = match rule {
                    AcquisitionRule::Eims => eta.record(s),
                    _ => mean_ref.record(s),
                };
                if let Err(e) = r {
                    failure.get_or_insert(e);
                }
            })?;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let eta = eta.report();
    Ok(vec![eta.implication, eta.adversarial, floor.report(), mean_ref.report()])
}
