//! Report bundles: metrics.json plus CSV/SVG twins for the confusion
//! matrix, per-class ROC curves, and the feature correlation matrix.
//!
//! Rendering is deterministic — no timestamps, fixed float formatting —
//! so re-rendering the same report produces byte-identical files.

use crate::evaluate::EvaluationReport;
use crate::jsonfmt;
use crate::select::CorrelationMatrix;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Files written by one `render_report` call.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    plant: &'a str,
    accuracy: f64,
    macro_f1: f64,
    weighted_f1: f64,
    macro_auc: f64,
    per_class: Vec<PerClassDoc<'a>>,
}

#[derive(Serialize)]
struct PerClassDoc<'a> {
    label: &'a str,
    precision: f64,
    recall: f64,
    f1: f64,
    support: u64,
    auc: f64,
}

/// Lowercase alphanumeric file stem for a class label.
pub fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// The scalar metrics of a report as pretty JSON (the metrics.json body).
pub fn metrics_json(report: &EvaluationReport) -> String {
    let doc = MetricsDoc {
        plant: &report.plant,
        accuracy: report.accuracy,
        macro_f1: report.macro_f1,
        weighted_f1: report.weighted_f1,
        macro_auc: report.macro_auc,
        per_class: report
            .per_class
            .iter()
            .zip(&report.auc)
            .map(|(c, &auc)| PerClassDoc {
                label: &c.label,
                precision: c.precision,
                recall: c.recall,
                f1: c.f1,
                support: c.support,
                auc,
            })
            .collect(),
    };
    jsonfmt::to_string_pretty(&doc).expect("metrics serialize") + "\n"
}

/// Write the full bundle; `corr` is optional (e.g. training ran with
/// selection disabled).
pub fn render_report(
    report: &EvaluationReport,
    corr: Option<&CorrelationMatrix>,
    out_dir: &Path,
) -> Result<ReportBundle, ReportError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut files = Vec::new();
    let write = |name: String, content: String, files: &mut Vec<PathBuf>| {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(io_err(&path))?;
        files.push(path);
        Ok::<(), ReportError>(())
    };

    write("metrics.json".into(), metrics_json(report), &mut files)?;

    write("confusion.csv".into(), report.confusion.to_csv(), &mut files)?;
    write("confusion.svg".into(), confusion_svg(report), &mut files)?;

    for (c, curve) in report.roc.iter().enumerate() {
        let mut csv = String::from("fpr,tpr\n");
        for (fpr, tpr) in curve {
            writeln!(csv, "{},{}", jsonfmt::fmt_f64(*fpr), jsonfmt::fmt_f64(*tpr)).unwrap();
        }
        write(format!("roc_{}.csv", sanitize(&report.confusion.labels[c])), csv, &mut files)?;
    }
    write("roc.svg".into(), roc_svg(report), &mut files)?;

    if let Some(corr) = corr {
        write("correlation.csv".into(), corr.to_csv(), &mut files)?;
        write("correlation.svg".into(), correlation_svg(corr), &mut files)?;
    }

    Ok(ReportBundle { dir: out_dir.to_path_buf(), files })
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn svg_header(width: u32, height: u32) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

fn heat_color(t: f64) -> String {
    // White to steel blue.
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 - t * (255.0 - 70.0)).round() as u8;
    let g = (255.0 - t * (255.0 - 130.0)).round() as u8;
    let b = (255.0 - t * (255.0 - 180.0)).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn diverging_color(r: f64) -> String {
    // Blue (-1) through white (0) to red (+1).
    let r = r.clamp(-1.0, 1.0);
    let (red, green, blue) = if r >= 0.0 {
        (255, (255.0 - r * 180.0).round() as u8, (255.0 - r * 180.0).round() as u8)
    } else {
        ((255.0 + r * 180.0).round() as u8, (255.0 + r * 180.0).round() as u8, 255)
    };
    format!("#{red:02x}{green:02x}{blue:02x}")
}

fn confusion_svg(report: &EvaluationReport) -> String {
    let cm = &report.confusion;
    let k = cm.labels.len();
    let cell = 52u32;
    let margin = 150u32;
    let width = margin + cell * k as u32 + 20;
    let height = margin + cell * k as u32 + 20;
    let max = cm.counts.iter().flatten().copied().max().unwrap_or(0).max(1);

    let mut svg = svg_header(width, height);
    writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-size=\"14\">confusion matrix — {} (acc {:.4})</text>",
        margin,
        xml_escape(&report.plant),
        report.accuracy
    )
    .unwrap();

    for (j, label) in cm.labels.iter().enumerate() {
        // Column headers (predicted).
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\" \
             transform=\"rotate(-60 {x} {y})\" >{}</text>",
            margin + j as u32 * cell + cell / 2,
            margin - 8,
            xml_escape(label),
            x = margin + j as u32 * cell + cell / 2,
            y = margin - 8,
        )
        .unwrap();
    }
    for (i, label) in cm.labels.iter().enumerate() {
        // Row labels (true).
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            margin - 8,
            margin + i as u32 * cell + cell / 2 + 4,
            xml_escape(label)
        )
        .unwrap();
    }
    for i in 0..k {
        for j in 0..k {
            let count = cm.counts[i][j];
            let x = margin + j as u32 * cell;
            let y = margin + i as u32 * cell;
            writeln!(
                svg,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" \
                 stroke=\"#cccccc\"/>",
                heat_color(count as f64 / max as f64)
            )
            .unwrap();
            writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{count}</text>",
                x + cell / 2,
                y + cell / 2 + 4
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn roc_svg(report: &EvaluationReport) -> String {
    let size = 420u32;
    let margin = 50u32;
    let plot = (size - 2 * margin) as f64;
    let width = size + 260;
    let mut svg = svg_header(width, size);
    let to_x = |fpr: f64| margin as f64 + fpr * plot;
    let to_y = |tpr: f64| (size - margin) as f64 - tpr * plot;

    writeln!(
        svg,
        "<text x=\"{margin}\" y=\"24\" font-size=\"14\">one-vs-rest ROC — {}</text>",
        xml_escape(&report.plant)
    )
    .unwrap();
    // Axes and the chance diagonal.
    writeln!(
        svg,
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{plot:.1}\" height=\"{plot:.1}\" \
         fill=\"none\" stroke=\"black\"/>"
    )
    .unwrap();
    writeln!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999999\" \
         stroke-dasharray=\"4 4\"/>",
        to_x(0.0),
        to_y(0.0),
        to_x(1.0),
        to_y(1.0)
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">false positive rate</text>",
        margin as f64 + plot / 2.0,
        size - 12
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"14\" y=\"{:.1}\" font-size=\"11\" transform=\"rotate(-90 14 {:.1})\" \
         text-anchor=\"middle\">true positive rate</text>",
        margin as f64 + plot / 2.0,
        margin as f64 + plot / 2.0
    )
    .unwrap();

    for (c, curve) in report.roc.iter().enumerate() {
        if curve.is_empty() {
            continue;
        }
        let color = PALETTE[c % PALETTE.len()];
        let points: Vec<String> = curve
            .iter()
            .map(|(fpr, tpr)| format!("{:.2},{:.2}", to_x(*fpr), to_y(*tpr)))
            .collect();
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.join(" ")
        )
        .unwrap();
        let ly = margin + 16 * c as u32 + 10;
        writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\
             <text x=\"{}\" y=\"{}\" font-size=\"11\">{} (auc {:.4})</text>",
            size + 10,
            ly,
            size + 26,
            ly + 9,
            xml_escape(&report.confusion.labels[c]),
            report.auc[c]
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn correlation_svg(corr: &CorrelationMatrix) -> String {
    let d = corr.dim();
    let cell = 30u32;
    let margin = 150u32;
    let width = margin + cell * d as u32 + 20;
    let height = margin + cell * d as u32 + 20;
    let mut svg = svg_header(width, height);
    writeln!(svg, "<text x=\"{margin}\" y=\"24\" font-size=\"14\">feature correlation</text>").unwrap();

    for (j, name) in corr.names.iter().enumerate() {
        writeln!(
            svg,
            "<text x=\"{x}\" y=\"{y}\" font-size=\"9\" text-anchor=\"end\" \
             transform=\"rotate(-60 {x} {y})\">{}</text>",
            xml_escape(name),
            x = margin + j as u32 * cell + cell / 2,
            y = margin - 6,
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"end\">{}</text>",
            margin - 6,
            margin + j as u32 * cell + cell / 2 + 3,
            xml_escape(name)
        )
        .unwrap();
    }
    for i in 0..d {
        for j in 0..d {
            let r = corr.at(i, j);
            let x = margin + j as u32 * cell;
            let y = margin + i as u32 * cell;
            writeln!(
                svg,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" \
                 stroke=\"#dddddd\"/>",
                diverging_color(r)
            )
            .unwrap();
            writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-size=\"7\" text-anchor=\"middle\">{r:.2}</text>",
                x + cell / 2,
                y + cell / 2 + 2
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
