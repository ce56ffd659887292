//! CSV persistence of traces, aggregates and check reports.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::acquisitions::AcquisitionRule;
use crate::driver::{TraceRow, TrialTrace};
use crate::error::{Error, Result};
use crate::theory::CheckReport;

use super::plot::emit_plot_data;
use super::{AggregateResult, ExperimentResult};

const TRACE_HEADER: [&str; 9] = [
    "t",
    "x_index",
    "y",
    "f",
    "g_star",
    "eta",
    "schedule_value",
    "simple_regret",
    "cum_regret",
];

/// Metadata lines at the top of a trace file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceMeta {
    rule: AcquisitionRule,
    trial: usize,
    seed: String,
    config_fingerprint: String,
    objective_fingerprint: String,
    init_indices: Vec<usize>,
    init_in_regret: bool,
}

fn toml_value<T: serde::Serialize>(v: &T) -> Result<toml::Value> {
    toml::Value::try_from(v).map_err(|e| Error::Config(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trace file name of a rule in a trial.
pub fn trace_file_name(trial: usize, rule: &AcquisitionRule) -> String {
    format!("trial-{trial}-{}.csv", rule.slug())
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes one trace: `# key = value` metadata lines, then a CSV table.
/// Empty cells stand for quantities the rule does not define.
pub fn write_trace(trace: &TrialTrace, path: &Path) -> Result<()> {
    let mut out = String::new();
    if let toml::Value::Table(rule) = toml_value(&trace.rule)? {
        for (k, v) in rule {
            out.push_str(&format!("# rule.{k} = {v}\n"));
        }
    }
    let indices = toml_value(&trace.init_indices)?;
    out.push_str(&format!("# trial = {}\n", trace.trial));
    out.push_str(&format!("# seed = \"{}\"\n", trace.seed));
    out.push_str(&format!("# config_fingerprint = \"{}\"\n", trace.config_fingerprint));
    out.push_str(&format!("# objective_fingerprint = \"{}\"\n", trace.objective_fingerprint));
    out.push_str(&format!("# init_indices = {indices}\n"));
    out.push_str("# init_in_regret = false\n");

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e| Error::csv(path, e);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in &trace.rows {
        w.write_record([
            r.t.to_string(),
            r.x_index.to_string(),
            r.y.to_string(),
            r.f.to_string(),
            opt(r.g_star),
            opt(r.eta),
            opt(r.schedule_value),
            r.simple_regret.to_string(),
            r.cum_regret.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let table = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    let mut file = create(path)?;
    file.write_all(out.as_bytes())
        .and_then(|_| file.write_all(&table))
        .map_err(|e| Error::io(path, e))
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<TrialTrace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: String| Error::Trace { path: path.to_path_buf(), reason };
    let mut meta = String::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        match line.strip_prefix('#') {
            Some(rest) => {
                meta.push_str(rest.trim_start());
                body_start += line.len();
            }
            None => break,
        }
    }
    let meta: TraceMeta = toml::from_str(&meta).map_err(|e| malformed(e.to_string()))?;
    if meta.init_in_regret {
        return Err(malformed("traces that count the initial design are not supported".into()));
    }
    let seed = meta.seed.parse().map_err(|_| malformed(format!("bad seed {:?}", meta.seed)))?;

    let mut reader = csv::Reader::from_reader(&text.as_bytes()[body_start..]);
    let header = reader.headers().map_err(|e| Error::csv(path, e))?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(malformed(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            cell(i).parse().map_err(|_| malformed(format!("bad {} value {:?}", TRACE_HEADER[i], cell(i))))
        };
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if cell(i).is_empty() { Ok(None) } else { num(i).map(Some) }
        };
        let int = |i: usize| -> Result<usize> {
            cell(i).parse().map_err(|_| malformed(format!("bad {} value {:?}", TRACE_HEADER[i], cell(i))))
        };
        rows.push(TraceRow {
            t: int(0)?,
            x_index: int(1)?,
            y: num(2)?,
            f: num(3)?,
            g_star: opt_num(4)?,
            eta: opt_num(5)?,
            schedule_value: opt_num(6)?,
            simple_regret: num(7)?,
            cum_regret: num(8)?,
        });
    }
    Ok(TrialTrace {
        rule: meta.rule,
        trial: meta.trial,
        seed,
        config_fingerprint: meta.config_fingerprint,
        objective_fingerprint: meta.objective_fingerprint,
        init_indices: meta.init_indices,
        rows,
    })
}

/// Loads every trace under `dir/traces`, ordered by file name.
pub fn load_traces(dir: &Path) -> Result<Vec<TrialTrace>> {
    let traces_dir = dir.join("traces");
    let mut paths: Vec<PathBuf> = fs::read_dir(&traces_dir)
        .map_err(|e| Error::io(&traces_dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(&traces_dir, e)))
        .collect::<Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    paths.sort();
    paths.iter().map(|p| read_trace(p)).collect()
}

/// Long-format aggregate table: `rule,t,metric,mean,stderr`.
pub fn write_aggregate_csv(aggregate: &AggregateResult, path: &Path) -> Result<()> {
    let file = create(path)?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e| Error::csv(path, e);
    w.write_record(["rule", "t", "metric", "mean", "stderr"]).map_err(csv_err)?;
    for r in &aggregate.rules {
        let name = r.rule.name();
        for (metric, mean, se) in [
            ("simple_regret", &r.simple_mean, &r.simple_stderr),
            ("cumulative_regret", &r.cum_mean, &r.cum_stderr),
        ] {
            for (t, (m, s)) in mean.iter().zip(se).enumerate() {
                w.write_record([name.clone(), (t + 1).to_string(), metric.into(), m.to_string(), s.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Check reports as CSV: `name,source,cases,violations,worst_margin`.
pub fn write_check_reports(reports: &[CheckReport], path: &Path) -> Result<()> {
    let file = create(path)?;
    let mut w = csv::Writer::from_writer(file);
    for r in reports {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    if reports.is_empty() {
        w.write_record(["name", "source", "cases", "violations", "worst_margin"])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the config, traces, failures, check reports and plot data of a
/// run under `dir`.
pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join("config.toml");
    let text = super::ExperimentConfig { output_dir: None, ..result.config.clone() }.to_toml()?;
    fs::write(&config_path, text).map_err(|e| Error::io(&config_path, e))?;
    for trace in &result.traces {
        write_trace(trace, &dir.join("traces").join(trace_file_name(trace.trial, &trace.rule)))?;
    }
    let failures_path = dir.join("failures.csv");
    if result.failures.is_empty() {
        if failures_path.exists() {
            fs::remove_file(&failures_path).map_err(|e| Error::io(&failures_path, e))?;
        }
    } else {
        let mut w = csv::Writer::from_writer(create(&failures_path)?);
        let csv_err = |e| Error::csv(&failures_path, e);
        w.write_record(["trial", "rule", "message"]).map_err(csv_err)?;
        for f in &result.failures {
            w.write_record([f.trial.to_string(), f.rule.name(), f.message.clone()]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&failures_path, e))?;
    }
    if let Some(checks) = &result.checks {
        write_check_reports(&checks.reports(), &dir.join("checks.csv"))?;
    }
    emit_plot_data(&result.aggregate, dir)
}
