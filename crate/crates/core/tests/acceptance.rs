//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use gp_eims::acquisitions::{ei_value, AcquisitionRule, MeanReference};
use gp_eims::experiment::{preset, regret_bound, run_experiment, ExperimentConfig, ExperimentResult, RunOptions};
use gp_eims::gaussmath::{scan_q_bound, scan_tau_lower_bound};
use gp_eims::gp::{Dataset, GpPosterior};
use gp_eims::kernels::KernelSpec;
use gp_eims::points::Points;
use gp_eims::sampling::{path_max, sample_exact_many};
use gp_eims::seeds;
use gp_eims::synthetic::make_grid;
use gp_eims::theory::{
    check_ei_sandwich, counterexample_constant_query, ks_critical_1pct, ks_statistic, mig_greedy,
    random_mig_case,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Criterion 1 parts that do not need the desk run.
fn inequality_scans() -> Outcome {
    let q = scan_q_bound(10.0, 10_000);
    let tau = scan_tau_lower_bound(40.0, 10_000);
    let sandwich = check_ei_sandwich(10_000, &mut seeds::rng(1));
    let passed = q.cases == 10_000
        && q.violations == 0
        && tau.cases == 10_000
        && tau.violations == 0
        && sandwich.cases >= 10_000
        && sandwich.violations == 0;
    outcome(
        passed,
        format!(
            "Q-bound {}/{} violations, tau bound {}/{}, EI sandwich {}/{}",
            q.violations, q.cases, tau.violations, tau.cases, sandwich.violations, sandwich.cases
        ),
    )
}

/// Criterion 1 parts collected along the desk trajectories.
fn desk_inequalities(desk: &ExperimentResult) -> Outcome {
    let Some(checks) = &desk.checks else {
        return outcome(false, "desk run has no checks".into());
    };
    let floor = &checks.variance_floor;
    let Some(eta) = &checks.eta_lemma else {
        return outcome(false, "no GP-EIMS eta records".into());
    };
    let Some(mean_ref) = &checks.mean_reference else {
        return outcome(false, "no GP-EI-mumax records".into());
    };
    let eims_rounds = desk.config.trials * desk.config.horizon;
    let passed = floor.violations == 0
        && floor.cases > 0
        && eta.rounds == eims_rounds
        && eta.implication.violations == 0
        && eta.event_frequency() >= 0.9
        && mean_ref.violations == 0
        && mean_ref.cases > 0;
    outcome(
        passed,
        format!(
            "variance floor {}/{} violations, eta {}/{} violations over {} rounds with event rate {:.4}, mean reference {}/{}",
            floor.violations,
            floor.cases,
            eta.implication.violations,
            eta.implication.cases,
            eta.rounds,
            eta.event_frequency(),
            mean_ref.violations,
            mean_ref.cases
        ),
    )
}

fn ei_monte_carlo() -> Outcome {
    let mut rng = seeds::rng(2);
    let samples = 1_000_000;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..50 {
        let mean = rng.random_range(-2.0..2.0);
        let sd = rng.random_range(0.05..2.0);
        // Keep the reference within 3 sd of the mean so the Monte Carlo
        // estimate sees improvements.
        let reference = mean - sd * rng.random_range(-3.0..3.0);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let z: f64 = StandardNormal.sample(&mut rng);
            let gain = (mean + sd * z - reference).max(0.0);
            sum += gain;
            sum_sq += gain * gain;
        }
        let n = samples as f64;
        let mc = sum / n;
        let se = ((sum_sq / n - mc * mc).max(0.0) * n / (n - 1.0) / n).sqrt();
        let z = (ei_value(mean, sd, reference) - mc).abs() / se.max(1e-300);
        worst = worst.max(z);
        if z > 3.0 {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures}/50 outside 3 SE, largest deviation {worst:.3} SE"))
}

fn counterexample() -> Outcome {
    let kernel = KernelSpec::squared_exponential(0.1, 1).unwrap();
    let grid = Points::from_rows(&[[0.0], [1.0]]).unwrap();
    let sep = counterexample_constant_query(&kernel, &grid, 0, 1, 0.01, 200).unwrap();
    let same = counterexample_constant_query(&kernel, &grid, 0, 0, 0.01, 200).unwrap();
    let (r_sep, r_same) = (sep.doubling_ratio(), same.doubling_ratio());
    outcome(
        (1.9..=2.1).contains(&r_sep) && r_same < 1.6,
        format!("separated ratio {r_sep:.4}, same-point ratio {r_same:.4}"),
    )
}

fn bound_check(desk: &ExperimentResult) -> Outcome {
    let (constants, bound) = regret_bound(&desk.config).unwrap();
    let eims = desk.aggregate.rule(&AcquisitionRule::Eims).unwrap();
    let empirical = *eims.cum_mean.last().unwrap();
    let gamma = constants.gamma_hat.unwrap();
    let mut detail = format!(
        "mean cumulative regret {empirical:.4} vs bound {bound:.4} (C1 {:.4}, B_T {:.4}, gamma_hat {gamma:.4})",
        constants.c1, constants.b_t
    );
    let passed = empirical <= bound;
    if !passed {
        let t = desk.config.horizon as f64;
        let rate = t.ln().powi(desk.config.grid.dim as i32 + 1);
        detail.push_str(&format!("; diagnostic: analytic SE rate (log T)^(d+1) = {rate:.4}"));
    }
    outcome(passed, detail)
}

fn ordering(desk: &ExperimentResult) -> Outcome {
    let last = |rule: AcquisitionRule| {
        let r = desk.aggregate.rule(&rule).unwrap();
        (*r.cum_mean.last().unwrap(), *r.cum_stderr.last().unwrap())
    };
    let eims = last(AcquisitionRule::Eims);
    let mut passed = true;
    let mut parts = vec![format!("GP-EIMS {:.3} ± {:.3}", eims.0, eims.1)];
    for rule in [AcquisitionRule::Ucb, AcquisitionRule::EiMuMax { reference: MeanReference::GlobalMean }] {
        let other = last(rule);
        let margin = 2.0 * (eims.1.powi(2) + other.1.powi(2)).sqrt();
        passed &= other.0 - eims.0 > margin;
        parts.push(format!(
            "{} {:.3} ± {:.3} (gap {:.3}, needed > {:.3})",
            rule.name(),
            other.0,
            other.1,
            other.0 - eims.0,
            margin
        ));
    }
    outcome(passed, parts.join(", "))
}

fn probability_matching() -> Outcome {
    let grid = Points::new(1, (0..50).map(|i| i as f64 / 49.0).collect()).unwrap();
    let kernel = KernelSpec::squared_exponential(0.15, 1).unwrap();
    let x = Points::from_rows(&[[0.1], [0.35], [0.5], [0.8], [0.95]]).unwrap();
    let data = Dataset::new(x, vec![0.3, -0.4, 0.9, 0.1, 0.6]).unwrap();
    let post = GpPosterior::fit(kernel, data, 0.04).unwrap();
    let n = 10_000;

    let paths = sample_exact_many(&post, &grid, n, &mut seeds::rng(3)).unwrap();
    let sampled: Vec<f64> = paths.iter().map(|p| path_max(p, &grid).unwrap().0).collect();

    let (means, _) = post.predict_batch(&grid).unwrap();
    let mut cov = post.covariance(&grid).unwrap();
    for i in 0..grid.len() {
        cov[(i, i)] += 1e-10;
    }
    let l = cov.cholesky().unwrap().l();
    let mean = DVector::from_vec(means);
    let mut rng = seeds::rng(4);
    let fresh: Vec<f64> = (0..n)
        .map(|_| {
            let z = DVector::from_fn(grid.len(), |_, _| StandardNormal.sample(&mut rng));
            (&mean + &l * z).max()
        })
        .collect();
    let d = ks_statistic(&sampled, &fresh);
    let crit = ks_critical_1pct(n, n);
    let oracle_crit = 1.6276 * ((2 * n) as f64 / (n * n) as f64).sqrt();
    outcome(
        d < crit && (crit - oracle_crit).abs() < 1e-12,
        format!("KS statistic {d:.5} vs 1% critical value {crit:.5}"),
    )
}

fn exhaustive_gain(kernel: &KernelSpec, grid: &Points, t: usize, noise_var: f64) -> f64 {
    let k = kernel.matrix(grid).unwrap();
    let m = grid.len();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; t];
    loop {
        let sub = DMatrix::from_fn(t, t, |a, b| k[(idx[a], idx[b])] / noise_var)
            + DMatrix::identity(t, t);
        best = best.max(0.5 * sub.determinant().ln());
        let mut pos = t;
        while pos > 0 && idx[pos - 1] == m - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return best;
        }
        idx[pos - 1] += 1;
        let v = idx[pos - 1];
        idx[pos..].fill(v);
    }
}

fn mig_oracle() -> Outcome {
    let mut rng = seeds::rng(5);
    let mut failures = 0;
    let mut worst_ratio = f64::INFINITY;
    for _ in 0..20 {
        let (kernel, grid, t, noise) = random_mig_case(&mut rng).unwrap();
        assert!(grid.len() <= 12 && t <= 4);
        let greedy = *mig_greedy(&kernel, &grid, t, noise).unwrap().last().unwrap();
        let exact = exhaustive_gain(&kernel, &grid, t, noise);
        let tol = 1e-10 * exact.abs().max(1.0);
        if greedy > exact + tol || greedy < (1.0 - (-1.0f64).exp()) * exact - tol {
            failures += 1;
        }
        worst_ratio = worst_ratio.min(greedy / exact);
    }
    outcome(failures == 0, format!("{failures}/20 outside [(1-1/e) exact, exact], smallest ratio {worst_ratio:.4}"))
}

fn traces_identical(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a.join("traces"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        let x = fs::read(a.join("traces").join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join("traces").join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
    }
    let n_b = fs::read_dir(b.join("traces")).map_err(|e| e.to_string())?.count();
    if n_b != names.len() {
        return Err(format!("{} vs {n_b} trace files", names.len()));
    }
    Ok(names.len())
}

fn determinism(config: &ExperimentConfig, first: &Path) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let rerun = ExperimentConfig { output_dir: Some(dir.path().to_path_buf()), ..config.clone() };
    run_experiment(&rerun, RunOptions { checks: false, persist: true }).unwrap();
    match traces_identical(first, dir.path()) {
        Ok(n) if n == config.trials * config.rules.len() => {
            outcome(true, format!("{n} trace files byte-identical"))
        }
        Ok(n) => outcome(false, format!("only {n} trace files")),
        Err(e) => outcome(false, e),
    }
}

fn gp_oracle() -> Outcome {
    let mut rng = seeds::rng(6);
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        let kernel = KernelSpec::squared_exponential(rng.random_range(0.1..0.8), 2).unwrap();
        let noise_var = rng.random_range(1e-3..0.5);
        let rows: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Points::from_rows(&rows).unwrap();
        let post = GpPosterior::fit(kernel.clone(), Dataset::new(x.clone(), y.clone()).unwrap(), noise_var).unwrap();

        let gram = kernel.matrix(&x).unwrap() + DMatrix::identity(n, n) * noise_var;
        let inv = gram.try_inverse().unwrap();
        let yv = DVector::from_vec(y.clone());
        let grid = make_grid(&gp_eims::synthetic::GridSpec::uniform(2, 5, 0.25)).unwrap();
        let (means, vars) = post.predict_batch(&grid).unwrap();
        for (i, q) in grid.rows().enumerate() {
            let kv = DVector::from_iterator(n, x.rows().map(|r| kernel.eval(r, q).unwrap()));
            let mean = kv.dot(&(&inv * &yv));
            let var = kernel.eval(q, q).unwrap() - kv.dot(&(&inv * &kv));
            worst = worst.max((mean - means[i]).abs()).max((var - vars[i]).abs());
        }

        let mut seq = GpPosterior::fit(
            kernel.clone(),
            Dataset::new(Points::from_rows(&rows[..1]).unwrap(), y[..1].to_vec()).unwrap(),
            noise_var,
        )
        .unwrap();
        for j in 1..n {
            seq = seq.extend(&rows[j], y[j]).unwrap();
        }
        let (m2, v2) = seq.predict_batch(&grid).unwrap();
        for i in 0..grid.len() {
            worst = worst.max((m2[i] - means[i]).abs()).max((v2[i] - vars[i]).abs());
        }
    }
    outcome(worst <= 1e-8, format!("largest deviation {worst:.3e}"))
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, f64) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed().as_secs_f64())
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();

    let (scans, scan_secs) = timed(inequality_scans);
    let (o, t) = timed(ei_monte_carlo);
    results.push((2, "EI closed form vs Monte Carlo", o, t));
    let (o, t) = timed(counterexample);
    results.push((3, "counterexample growth", o, t));
    let (o, t) = timed(probability_matching);
    results.push((6, "probability matching", o, t));
    let (o, t) = timed(mig_oracle);
    results.push((7, "greedy information gain", o, t));
    let (o, t) = timed(gp_oracle);
    results.push((9, "GP posterior oracle", o, t));

    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let desk_config = ExperimentConfig {
        output_dir: Some(dir.path().to_path_buf()),
        ..preset("desk").unwrap()
    };
    let desk = run_experiment(&desk_config, RunOptions { checks: true, persist: true }).unwrap();
    let desk_secs = start.elapsed().as_secs_f64();
    println!("desk experiment: {} traces in {desk_secs:.1}s", desk.traces.len());
    assert!(desk.failures.is_empty(), "{:?}", desk.failures);

    let (traj, t) = timed(|| desk_inequalities(&desk));
    results.push((
        1,
        "inequality battery",
        outcome(scans.passed && traj.passed, format!("{}; {}", scans.detail, traj.detail)),
        scan_secs + t,
    ));
    let (o, t) = timed(|| bound_check(&desk));
    results.push((4, "cumulative regret bound", o, t));
    let (o, t) = timed(|| ordering(&desk));
    results.push((5, "regret ordering", o, t));
    let (o, t) = timed(|| determinism(&desk_config, dir.path()));
    results.push((8, "determinism", o, t));

    results.sort_by_key(|r| r.0);
    for (n, name, o, secs) in &results {
        println!(
            "{} criterion {n} {name}: {} ({secs:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
