//! Regret-curve figures as hand-written SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::io::write_aggregate_csv;
use super::{AggregateResult, RuleAggregate};

/// A plotted regret curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    SimpleRegret,
    CumulativeRegret,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::SimpleRegret, Metric::CumulativeRegret];

    pub fn key(self) -> &'static str {
        match self {
            Metric::SimpleRegret => "simple_regret",
            Metric::CumulativeRegret => "cumulative_regret",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Metric::SimpleRegret => "Simple regret",
            Metric::CumulativeRegret => "Cumulative regret",
        }
    }

    fn curves(self, r: &RuleAggregate) -> (&[f64], &[f64]) {
        match self {
            Metric::SimpleRegret => (&r.simple_mean, &r.simple_stderr),
            Metric::CumulativeRegret => (&r.cum_mean, &r.cum_stderr),
        }
    }
}

const STYLES: [(&str, &str, &str); 10] = [
    ("GP-EIMS", "#d62728", "none"),
    ("GP-UCB", "#1f77b4", "6 3"),
    ("IRGP-UCB", "#17becf", "2 2"),
    ("GP-TS", "#2ca02c", "none"),
    ("MES(10)", "#9467bd", "6 3"),
    ("GP-PIMS", "#ff7f0e", "2 2"),
    ("GP-EI", "#8c564b", "none"),
    ("GP-EI-mumax", "#7f7f7f", "6 3"),
    ("GP-EI-mumax-evaluated", "#bcbd22", "2 2"),
    ("E3I(1)", "#e377c2", "none"),
];

const DASHES: [&str; 3] = ["none", "6 3", "2 2"];

/// Stroke color and dash pattern of a rule, a function of its name only.
pub fn rule_style(name: &str) -> (String, &'static str) {
    if let Some(&(_, color, dash)) = STYLES.iter().find(|s| s.0 == name) {
        return (color.to_string(), dash);
    }
    let h = Sha256::digest(name.as_bytes());
    let color = format!("#{:02x}{:02x}{:02x}", h[0] / 2 + 40, h[1] / 2 + 40, h[2] / 2 + 40);
    (color, DASHES[h[3] as usize % DASHES.len()])
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// One line chart of `metric` with a ±1 standard-error band per rule.
pub fn render_svg(aggregate: &AggregateResult, metric: Metric) -> String {
    let horizon = aggregate.rules.iter().map(|r| r.horizon()).max().unwrap_or(1).max(1);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &aggregate.rules {
        let (mean, se) = metric.curves(r);
        for (m, s) in mean.iter().zip(se) {
            lo = lo.min(m - s);
            hi = hi.max(m + s);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    lo = lo.min(0.0);
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| {
        let span = (horizon - 1).max(1) as f64;
        LEFT + (t - 1.0) / span * plot_w
    };
    let sy = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        metric.title()
    );
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    for i in 0..=5 {
        let t = 1.0 + (horizon - 1) as f64 * i as f64 / 5.0;
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            t.round()
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration t</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );

    for (k, r) in aggregate.rules.iter().enumerate() {
        let name = r.rule.name();
        let (color, dash) = rule_style(&name);
        let (mean, se) = metric.curves(r);
        let mut band = String::new();
        for (t, (m, e)) in mean.iter().zip(se).enumerate() {
            let _ = write!(band, "{:.2},{:.2} ", sx((t + 1) as f64), sy(m + e));
        }
        for (t, (m, e)) in mean.iter().zip(se).enumerate().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx((t + 1) as f64), sy(m - e));
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = mean
            .iter()
            .enumerate()
            .map(|(t, m)| format!("{:.2},{:.2}", sx((t + 1) as f64), sy(*m)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 30.0,
            lx + 36.0,
            ly + 4.0,
            escape(&name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `aggregate.csv` and, when there is at least one rule, one SVG
/// per metric into `dir`.
pub fn emit_plot_data(aggregate: &AggregateResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_aggregate_csv(aggregate, &dir.join("aggregate.csv"))?;
    for metric in Metric::ALL {
        let path = dir.join(format!("{}.svg", metric.key()));
        if aggregate.rules.is_empty() {
            if path.exists() {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        } else {
            fs::write(&path, render_svg(aggregate, metric)).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}
