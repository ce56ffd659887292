use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gp_eims::experiment::{
    emit_plot_data, load_traces, preset, presets, regret_bound, run_experiment,
    write_check_reports, aggregate, information_gain_curve, ExperimentConfig, RunOptions,
};
use gp_eims::theory::{verify, CheckReport, VerifySettings, CHECK_NAMES};
use gp_eims::Error;

#[derive(Parser)]
#[command(name = "gp-eims", version, about = "Bayesian-optimization regret experiments and bound checks")]
struct Cli {
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or a preset name.
    Run {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the theory checks collected along the trajectories.
        #[arg(long)]
        no_checks: bool,
    },
    /// Run the theory-check battery.
    Verify {
        /// Run a single check.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(CHECK_NAMES))]
        check: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Directory for verify-report.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the greedy information-gain curve and the regret bound.
    Mig {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Regenerate aggregate.csv and figures from persisted traces.
    Plot { dir: PathBuf },
    /// List the shipped presets.
    Presets {
        /// Write each preset as <name>.toml into this directory.
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            config.master_seed = s;
        }
        if let Some(t) = self.trials {
            config.trials = t;
        }
        if let Some(h) = self.horizon {
            config.horizon = h;
        }
    }
}

enum Failure {
    Lib(Error),
    Violations(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn load_config(source: &str) -> Result<ExperimentConfig, Error> {
    let path = Path::new(source);
    if path.exists() {
        return ExperimentConfig::load(path);
    }
    preset(source).ok_or_else(|| {
        let names: Vec<&str> = presets().iter().map(|p| p.name).collect();
        Error::Config(format!(
            "{source} is neither a config file nor a preset ({})",
            names.join(", ")
        ))
    })
}

fn print_reports(reports: &[CheckReport]) {
    println!("{:<22} {:>9} {:>10} {:>14}", "check", "cases", "violations", "worst_margin");
    for r in reports {
        println!(
            "{:<22} {:>9} {:>10} {:>14.6e}",
            r.name, r.cases, r.violations, r.worst_margin
        );
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, overrides, out, no_checks } => {
            let mut config = load_config(&config)?;
            overrides.apply(&mut config);
            let dir = out
                .or_else(|| config.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("results").join(&config.name));
            config.output_dir = Some(dir.clone());
            let result = run_experiment(&config, RunOptions { checks: !no_checks, persist: true })?;
            println!(
                "{} trials x {} rounds, results in {}",
                config.trials,
                config.horizon,
                dir.display()
            );
            println!("{:<24} {:>22} {:>26}", "rule", "final simple regret", "final cumulative regret");
            for r in &result.aggregate.rules {
                let t = r.horizon() - 1;
                println!(
                    "{:<24} {:>12.5} ± {:<7.5} {:>14.4} ± {:<9.4}",
                    r.rule.name(),
                    r.simple_mean[t],
                    r.simple_stderr[t],
                    r.cum_mean[t],
                    r.cum_stderr[t]
                );
            }
            for f in &result.failures {
                eprintln!("trial {} {} failed: {}", f.trial, f.rule.name(), f.message);
            }
            if let Some(checks) = &result.checks {
                print_reports(&checks.reports());
                if checks.violations() > 0 {
                    return Err(Failure::Violations(checks.violations()));
                }
            }
            if !result.failures.is_empty() {
                return Err(Failure::Lib(Error::Domain(format!(
                    "{} trial runs failed",
                    result.failures.len()
                ))));
            }
            Ok(())
        }
        Command::Verify { check, seed, trials, horizon, out } => {
            let defaults = VerifySettings::default();
            let settings = VerifySettings {
                seed: seed.unwrap_or(defaults.seed),
                trials: trials.unwrap_or(defaults.trials),
                horizon: horizon.unwrap_or(defaults.horizon),
                ..defaults
            };
            let reports = verify(&settings, check.as_deref())?;
            print_reports(&reports);
            let path = out.join("verify-report.csv");
            write_check_reports(&reports, &path)?;
            println!("report written to {}", path.display());
            let violations: usize = reports.iter().map(|r| r.violations).sum();
            if violations > 0 {
                return Err(Failure::Violations(violations));
            }
            Ok(())
        }
        Command::Mig { config, overrides } => {
            let mut config = load_config(&config)?;
            overrides.apply(&mut config);
            let curve = information_gain_curve(&config)?;
            println!("t,gamma_hat");
            for (t, g) in curve.iter().enumerate() {
                println!("{},{g}", t + 1);
            }
            let (c, bound) = regret_bound(&config)?;
            eprintln!(
                "C1 = {:.6}, beta(delta) = {:.6}, C2 = {:.6}, B_T = {:.6}, bound on cumulative regret at T = {}: {:.6}",
                c.c1, c.beta_delta, c.c2, c.b_t, config.horizon, bound
            );
            Ok(())
        }
        Command::Plot { dir } => {
            let traces = load_traces(&dir)?;
            let agg = aggregate(&traces)?;
            emit_plot_data(&agg, &dir)?;
            println!("{} traces, {} rules, figures in {}", traces.len(), agg.rules.len(), dir.display());
            Ok(())
        }
        Command::Presets { write } => {
            for p in presets() {
                println!("{:<12} {}", p.name, p.description);
                if let Some(dir) = &write {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Domain(format!("{}: {e}", dir.display())))?;
                    let path = dir.join(format!("{}.toml", p.name));
                    std::fs::write(&path, p.config.to_toml()?)
                        .map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violations(n)) => {
            eprintln!("{n} theory-check violations");
            ExitCode::from(3)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
