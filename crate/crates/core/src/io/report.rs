//! Report and curve writers.
//!
//! Reports come in two formats: `table` is a flat key/value text with a
//! seven-column summary row, `json` is a structured document covering every
//! field of the report types. Both are deterministic: the same report always
//! produces the same bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{MetricReport, PrCurve};
use crate::search::{SearchCriterion, SearchResult};

/// Output format for report writers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Flat key/value text plus a column summary row.
    Table,
    /// Pretty-printed JSON with every report field.
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidConfig {
                detail: format!("unknown report format {other:?}; expected table or json"),
            }),
        }
    }
}

/// The seven-column summary header shared by metric and search tables.
const COLUMNS: [&str; 7] = [
    "AP50", "AR", "LRP_t", "oLRP_L", "oLRP_FP", "oLRP_FN", "oLRP",
];

fn column_row(report: &MetricReport) -> String {
    let mut s = String::new();
    for name in &COLUMNS[..6] {
        let _ = write!(s, "{name:<10}");
    }
    s.push_str(COLUMNS[6]);
    s.push('\n');
    let o = &report.olrp;
    for value in [
        report.ap50,
        report.ar,
        o.threshold,
        o.loc_component,
        o.fp_component,
        o.fn_component,
    ] {
        let _ = write!(s, "{value:<10.6}");
    }
    let _ = writeln!(s, "{:.6}", o.total);
    s
}

/// Render a metric report as flat key/value text followed by the column
/// summary row.
pub fn render_metric_table(report: &MetricReport) -> String {
    let o = &report.olrp;
    let mut s = String::new();
    let mut kv = |key: &str, value: String| {
        let _ = writeln!(s, "{key:<18} {value}");
    };
    kv("ap50", format!("{:.6}", report.ap50));
    kv("ar", format!("{:.6}", report.ar));
    kv("olrp", format!("{:.6}", o.total));
    kv("olrp_loc", format!("{:.6}", o.loc_component));
    kv("olrp_fp", format!("{:.6}", o.fp_component));
    kv("olrp_fn", format!("{:.6}", o.fn_component));
    kv("optimal_threshold", format!("{:.6}", o.threshold));
    kv("tp", o.tp.to_string());
    kv("fp", o.fp.to_string());
    kv("fn", o.fn_count.to_string());
    kv("predicted_boxes", report.predicted_boxes.to_string());
    kv("pr_curve_points", report.pr_curve.points.len().to_string());
    s.push('\n');
    s.push_str(&column_row(report));
    s
}

/// Render a search result: summary lines, the leaderboard, and the full
/// metric table of the winning assignment.
pub fn render_search_table(result: &SearchResult) -> String {
    let best_value = match result.criterion {
        SearchCriterion::MaximizeAp50 => result.best_report.ap50,
        SearchCriterion::MaximizeAr => result.best_report.ar,
        SearchCriterion::MinimizeOlrp => result.best_report.olrp.total,
    };
    let mut s = String::new();
    let _ = writeln!(s, "{:<18} {}", "criterion", result.criterion);
    let _ = writeln!(s, "{:<18} {}", "evaluated", result.evaluated_count);
    let _ = writeln!(s, "{:<18} {}", "best", result.best);
    let _ = writeln!(s, "{:<18} {best_value:.6}", "best_value");
    s.push('\n');
    let _ = writeln!(s, "{:<6}{:<10}assignment", "rank", "value");
    for (i, entry) in result.leaderboard.iter().enumerate() {
        let _ = writeln!(s, "{:<6}{:<10.6}{}", i + 1, entry.value, entry.assignment);
    }
    s.push('\n');
    s.push_str(&render_metric_table(&result.best_report));
    s
}

/// Write a metric report to `path` in the chosen format.
pub fn write_metric_report(report: &MetricReport, path: &Path, format: ReportFormat) -> Result<()> {
    let bytes = match format {
        ReportFormat::Table => render_metric_table(report).into_bytes(),
        ReportFormat::Json => super::to_pretty_json(report),
    };
    super::write_bytes(path, &bytes)
}

/// Write a search result to `path` in the chosen format.
pub fn write_search_report(result: &SearchResult, path: &Path, format: ReportFormat) -> Result<()> {
    let bytes = match format {
        ReportFormat::Table => render_search_table(result).into_bytes(),
        ReportFormat::Json => super::to_pretty_json(result),
    };
    super::write_bytes(path, &bytes)
}

/// Write a precision-recall curve as two-column CSV (`recall,precision`),
/// one row per rank.
pub fn pr_curve_csv(curve: &PrCurve, path: &Path) -> Result<()> {
    let mut s = String::from("recall,precision\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{}", p.recall, p.precision);
    }
    super::write_bytes(path, s.as_bytes())
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 480.0;
// Plot area inside the margins: x in [60, 620], y in [20, 420].
const PLOT_LEFT: f64 = 60.0;
const PLOT_RIGHT: f64 = 620.0;
const PLOT_TOP: f64 = 20.0;
const PLOT_BOTTOM: f64 = 420.0;

/// Write a precision-recall curve as a small standalone SVG line plot.
pub fn pr_curve_svg(curve: &PrCurve, path: &Path) -> Result<()> {
    let x = |recall: f64| PLOT_LEFT + recall * (PLOT_RIGHT - PLOT_LEFT);
    let y = |precision: f64| PLOT_BOTTOM - precision * (PLOT_BOTTOM - PLOT_TOP);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">"
    );
    let _ = writeln!(
        s,
        "  <rect x=\"0\" y=\"0\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"white\"/>"
    );
    // Axes with end labels.
    let _ = writeln!(
        s,
        "  <line x1=\"{PLOT_LEFT}\" y1=\"{PLOT_BOTTOM}\" x2=\"{PLOT_RIGHT}\" y2=\"{PLOT_BOTTOM}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        s,
        "  <line x1=\"{PLOT_LEFT}\" y1=\"{PLOT_BOTTOM}\" x2=\"{PLOT_LEFT}\" y2=\"{PLOT_TOP}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        s,
        "  <text x=\"{PLOT_LEFT}\" y=\"440\" font-size=\"12\" text-anchor=\"middle\">0</text>"
    );
    let _ = writeln!(
        s,
        "  <text x=\"{PLOT_RIGHT}\" y=\"440\" font-size=\"12\" text-anchor=\"middle\">1</text>"
    );
    let _ = writeln!(
        s,
        "  <text x=\"45\" y=\"{PLOT_BOTTOM}\" font-size=\"12\" text-anchor=\"end\">0</text>"
    );
    let _ = writeln!(
        s,
        "  <text x=\"45\" y=\"{PLOT_TOP}\" font-size=\"12\" text-anchor=\"end\">1</text>"
    );
    let _ = writeln!(
        s,
        "  <text x=\"340\" y=\"470\" font-size=\"14\" text-anchor=\"middle\">recall</text>"
    );
    let _ = writeln!(
        s,
        "  <text x=\"20\" y=\"220\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 220)\">precision</text>"
    );
    if !curve.points.is_empty() {
        let mut points = String::new();
        for (i, p) in curve.points.iter().enumerate() {
            if i > 0 {
                points.push(' ');
            }
            let _ = write!(points, "{:.2},{:.2}", x(p.recall), y(p.precision));
        }
        let _ = writeln!(
            s,
            "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{points}\"/>"
        );
    }
    s.push_str("</svg>\n");
    super::write_bytes(path, s.as_bytes())
}
