//! Rendering of metric reports: JSON, DET CSV, DET SVG on normal-deviate
//! axes, and plain-text tables laid out with one column per fold and a final
//! `Avg.±Std.` column.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::metrics::{DetPoint, MeanStd, MetricsReport, MetricsSummary};
use crate::protocols::ProtocolResult;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("DET csv line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
    #[error("DET csv has no points")]
    EmptyCsv,
    #[error("report json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Rates as percentages rounded to two decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayMetrics {
    pub d_eer: f64,
    pub bpcer10: f64,
    pub bpcer20: f64,
    pub bpcer100: f64,
    pub hter: f64,
    pub apcer_at_hter: f64,
    pub bpcer_at_hter: f64,
    pub auc: f64,
}

fn pct(x: f64) -> f64 {
    (x * 10000.0).round() / 100.0
}

impl From<&MetricsReport> for DisplayMetrics {
    fn from(r: &MetricsReport) -> Self {
        DisplayMetrics {
            d_eer: pct(r.d_eer),
            bpcer10: pct(r.bpcer10),
            bpcer20: pct(r.bpcer20),
            bpcer100: pct(r.bpcer100),
            hter: pct(r.hter),
            apcer_at_hter: pct(r.hter_apcer),
            bpcer_at_hter: pct(r.hter_bpcer),
            auc: pct(r.auc),
        }
    }
}

/// On-disk form of a single report: rounded percentages for people, the
/// full-precision report for programs, plus the conventions used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub system: String,
    pub display_percent: DisplayMetrics,
    pub metrics: MetricsReport,
    pub conventions: BTreeMap<String, String>,
}

impl ReportDocument {
    pub fn new(
        system: &str,
        metrics: MetricsReport,
        conventions: BTreeMap<String, String>,
    ) -> Self {
        ReportDocument {
            system: system.to_owned(),
            display_percent: DisplayMetrics::from(&metrics),
            metrics,
            conventions,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn det_csv(det: &[DetPoint]) -> String {
    let mut out = String::from("threshold,apcer,bpcer\n");
    for p in det {
        // `{}` on f64 prints the shortest representation that round-trips
        let _ = writeln!(out, "{},{},{}", p.threshold, p.apcer, p.bpcer);
    }
    out
}

pub fn parse_det_csv(text: &str) -> Result<Vec<DetPoint>, ReportError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("threshold")) {
            continue;
        }
        let bad = |reason: &str| ReportError::BadCsv {
            line: i + 1,
            reason: reason.to_owned(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad("expected 3 fields"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(&e.to_string()));
        let p = DetPoint {
            threshold: num(fields[0])?,
            apcer: num(fields[1])?,
            bpcer: num(fields[2])?,
        };
        if !(0.0..=1.0).contains(&p.apcer) || !(0.0..=1.0).contains(&p.bpcer) {
            return Err(bad("rates must lie in [0, 1]"));
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(ReportError::EmptyCsv);
    }
    Ok(points)
}

const TICKS: [f64; 14] = [
    0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99,
];
const AXIS_MIN: f64 = 0.001;
const AXIS_MAX: f64 = 0.99;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn probit(p: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(p.clamp(AXIS_MIN, AXIS_MAX))
}

fn tick_label(p: f64) -> String {
    let v = p * 100.0;
    if v < 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.0}")
    }
}

/// DET plot with normal-deviate axes, one polyline and legend entry per curve.
/// APCER on the x axis, BPCER on the y axis, both in percent.
pub fn det_svg(curves: &[(String, Vec<DetPoint>)]) -> String {
    let (w, h) = (640.0, 560.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let lo = probit(AXIS_MIN);
    let hi = probit(AXIS_MAX);
    let x = |p: f64| left + (probit(p) - lo) / (hi - lo) * pw;
    let y = |p: f64| top + ph - (probit(p) - lo) / (hi - lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    );
    for &t in &TICKS {
        let (tx, ty) = (x(t), y(t));
        let _ = writeln!(
            s,
            r##"<line x1="{tx:.2}" y1="{top}" x2="{tx:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            top + ph
        );
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#dddddd"/>"##,
            left + pw
        );
        let label = tick_label(t);
        let _ = writeln!(
            s,
            r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            top + ph + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            left - 6.0,
            ty + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">APCER (%)</text>"#,
        left + pw / 2.0,
        h - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.2})">BPCER (%)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, (name, det)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = det
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.apcer), y(p.bpcer)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 16.0 + 16.0 * i as f64;
        let lx = left + pw - 190.0;
        let _ = writeln!(
            s,
            r#"<line class="legend" x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            xml_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

type Metric = (
    &'static str,
    fn(&MetricsReport) -> f64,
    fn(&MetricsSummary) -> MeanStd,
);

const TABLE_METRICS: [Metric; 8] = [
    ("D-EER", |r| r.d_eer, |s| s.d_eer),
    ("BPCER10", |r| r.bpcer10, |s| s.bpcer10),
    ("BPCER20", |r| r.bpcer20, |s| s.bpcer20),
    ("BPCER100", |r| r.bpcer100, |s| s.bpcer100),
    ("APCER", |r| r.hter_apcer, |s| s.hter_apcer),
    ("BPCER", |r| r.hter_bpcer, |s| s.hter_bpcer),
    ("HTER", |r| r.hter, |s| s.hter),
    ("AUC", |r| r.auc, |s| s.auc),
];

/// Pipe-separated grid; the first `labels` columns are left-aligned.
fn render_grid(rows: &[Vec<String>], labels: usize) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = widths[c] - s.chars().count();
                if c < labels {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-+-"));
            out.push('\n');
        }
    }
    out
}

/// Table of single reports: one row per metric, one column per system.
pub fn metrics_table(reports: &[(String, &MetricsReport)]) -> String {
    let mut rows = vec![{
        let mut h = vec!["Metric (%)".to_string()];
        h.extend(reports.iter().map(|(n, _)| n.clone()));
        h
    }];
    for (name, get, _) in TABLE_METRICS {
        let mut row = vec![name.to_string()];
        row.extend(
            reports
                .iter()
                .map(|(_, r)| format!("{:.2}", get(r) * 100.0)),
        );
        rows.push(row);
    }
    render_grid(&rows, 1)
}

/// Protocol result as text: per subset, rows are system x metric, columns are
/// folds followed by `Avg.±Std.` (all in percent).
pub fn protocol_table(result: &ProtocolResult) -> String {
    let mut out = String::new();
    let title = if result.name.is_empty() {
        result.kind.clone()
    } else {
        format!("{} ({})", result.name, result.kind)
    };
    let _ = writeln!(out, "{title}");
    let mut subsets: Vec<&str> = Vec::new();
    for a in &result.aggregate {
        if !subsets.contains(&a.subset.as_str()) {
            subsets.push(&a.subset);
        }
    }
    for subset in subsets {
        let _ = writeln!(out, "\n[{subset}]");
        let folds: Vec<_> = result
            .folds
            .iter()
            .filter(|f| f.reports.iter().any(|r| r.subset == subset))
            .collect();
        let mut header = vec!["System".to_string(), "Metric (%)".to_string()];
        header.extend(folds.iter().map(|f| f.fold_id.clone()));
        header.push("Avg.±Std.".into());
        let mut rows = vec![header];
        for agg in result.aggregate.iter().filter(|a| a.subset == subset) {
            for (k, (name, get, summary)) in TABLE_METRICS.iter().enumerate() {
                let mut row = vec![
                    if k == 0 {
                        agg.system.clone()
                    } else {
                        String::new()
                    },
                    name.to_string(),
                ];
                for f in &folds {
                    let cell = f
                        .reports
                        .iter()
                        .find(|r| r.system == agg.system && r.subset == subset)
                        .map(|r| format!("{:.2}", get(&r.metrics) * 100.0))
                        .unwrap_or_else(|| "-".into());
                    row.push(cell);
                }
                let ms = summary(&agg.summary);
                row.push(format!("{:.2}±{:.2}", ms.mean * 100.0, ms.std * 100.0));
                rows.push(row);
            }
        }
        out.push_str(&render_grid(&rows, 2));
    }
    if !result.warnings.is_empty() {
        out.push_str("\nwarnings:\n");
        for w in &result.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    out.push_str("\nconventions:\n");
    for (k, v) in &result.conventions {
        let _ = writeln!(out, "  {k}: {v}");
    }
    out
}
