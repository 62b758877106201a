//! Comparison tables and plots from one or more evaluation reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use poc_core::metrics::boxplot::FiveNumber;
use poc_core::metrics::AnomalyReport;
use serde::{Deserialize, Serialize};

pub const TABLE_FILE: &str = "metrics.csv";
pub const PR_CURVES_FILE: &str = "pr_curves.svg";
pub const BOXPLOTS_FILE: &str = "boxplots.svg";

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub dataset: String,
    pub method: String,
    #[serde(rename = "F1")]
    pub max_f1: f64,
    #[serde(rename = "AuPRC")]
    pub auprc: f64,
    #[serde(rename = "FPR95")]
    pub fpr_at_95tpr: f64,
}

impl From<&AnomalyReport> for Row {
    fn from(r: &AnomalyReport) -> Self {
        Self {
            dataset: r.dataset.clone(),
            method: r.method.clone(),
            max_f1: r.max_f1,
            auprc: r.auprc,
            fpr_at_95tpr: r.fpr_at_95tpr,
        }
    }
}

/// A report that failed to load, with the offending path.
#[derive(Debug, thiserror::Error)]
#[error("malformed report {}: {reason}", path.display())]
pub struct MalformedReport {
    pub path: PathBuf,
    pub reason: String,
}

pub fn load_reports(paths: &[PathBuf]) -> Result<Vec<AnomalyReport>, MalformedReport> {
    paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(|e| MalformedReport {
                path: p.clone(),
                reason: e.to_string(),
            })?;
            serde_json::from_slice(&bytes).map_err(|e| MalformedReport {
                path: p.clone(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Reports sorted by dataset, then method.
pub fn sorted(mut reports: Vec<AnomalyReport>) -> Vec<AnomalyReport> {
    reports.sort_by(|a, b| (&a.dataset, &a.method).cmp(&(&b.dataset, &b.method)));
    reports
}

pub fn write_table(path: &Path, reports: &[AnomalyReport]) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in reports {
        w.serialize(Row::from(r))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
pub fn read_table(path: &Path) -> anyhow::Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn label(r: &AnomalyReport) -> String {
    escape(&format!("{} / {}", r.dataset, r.method))
}

struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn x(&self, t: f64) -> f64 {
        self.left + t * (self.width - self.left - self.right)
    }

    fn y(&self, t: f64) -> f64 {
        self.height - self.bottom - t * (self.height - self.top - self.bottom)
    }

    fn open(&self, svg: &mut String, title: &str) {
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            self.width / 2.0,
            escape(title)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            self.left,
            self.top,
            self.width - self.left - self.right,
            self.height - self.top - self.bottom
        );
    }
}

/// Precision against recall, one polyline per report.
pub fn pr_curves_svg(reports: &[AnomalyReport]) -> String {
    let f = Frame {
        width: 640.0,
        height: 480.0,
        left: 60.0,
        right: 200.0,
        top: 40.0,
        bottom: 50.0,
    };
    let mut svg = String::new();
    f.open(&mut svg, "Precision-recall curves");
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t:.1}</text>"#,
            f.x(t),
            f.y(0.0) + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t:.1}</text>"#,
            f.x(0.0) - 6.0,
            f.y(t) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">recall</text>"#,
        f.x(0.5),
        f.height - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">precision</text>"#,
        f.y(0.5),
        f.y(0.5)
    );
    for (i, r) in reports.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = r
            .pr_curve
            .iter()
            .map(|&(rec, prec)| format!("{:.2},{:.2}", f.x(rec), f.y(prec)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = f.top + 15.0 + 18.0 * i as f64;
        let lx = f.width - f.right + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{} (AP {:.3})</text>"#,
            lx + 25.0,
            ly + 4.0,
            label(r),
            r.auprc
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Score distributions of in-distribution and OOD pixels, one pair of
/// boxes per report. Whiskers span min to max.
pub fn boxplots_svg(reports: &[AnomalyReport]) -> String {
    let slot = 90.0;
    let f = Frame {
        width: 80.0 + slot * reports.len().max(1) as f64,
        height: 420.0,
        left: 60.0,
        right: 20.0,
        top: 40.0,
        bottom: 90.0,
    };
    let (lo, hi) = reports
        .iter()
        .flat_map(|r| {
            [
                r.boxplot_id.min,
                r.boxplot_ood.min,
                r.boxplot_id.max,
                r.boxplot_ood.max,
            ]
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (0.0, 1.0)
    };
    let norm = |v: f64| (v - lo) / (hi - lo);

    let mut svg = String::new();
    f.open(&mut svg, "Anomaly score distributions");
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            f.x(0.0) - 6.0,
            f.y(t) + 4.0,
            lo + t * (hi - lo)
        );
    }
    let draw = |svg: &mut String, cx: f64, b: &FiveNumber, color: &str| {
        let half = 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{cx:.1}" y1="{:.2}" x2="{cx:.1}" y2="{:.2}" stroke="black"/>"#,
            f.y(norm(b.min)),
            f.y(norm(b.max))
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.2}" width="{:.1}" height="{:.2}" fill="{color}" fill-opacity="0.6" stroke="black"/>"#,
            cx - half,
            f.y(norm(b.q3)),
            2.0 * half,
            (f.y(norm(b.q1)) - f.y(norm(b.q3))).max(0.5)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.2}" x2="{:.1}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            f.y(norm(b.median)),
            cx + half,
            f.y(norm(b.median))
        );
    };
    for (i, r) in reports.iter().enumerate() {
        let base = f.left + 10.0 + slot * i as f64;
        draw(&mut svg, base + 22.0, &r.boxplot_id, "#1f77b4");
        draw(&mut svg, base + 58.0, &r.boxplot_ood, "#d62728");
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">ID  OOD</text>"#,
            base + 40.0,
            f.y(0.0) + 16.0
        );
        let tx = base + 40.0;
        let ty = f.y(0.0) + 32.0;
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.1}" y="{ty:.1}" text-anchor="end" font-size="10" transform="rotate(-35 {tx:.1} {ty:.1})">{}</text>"#,
            label(r)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes the table and both plots into `out_dir`.
pub fn write_all(out_dir: &Path, reports: &[AnomalyReport]) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let table = out_dir.join(TABLE_FILE);
    write_table(&table, reports)?;
    let pr = out_dir.join(PR_CURVES_FILE);
    std::fs::write(&pr, pr_curves_svg(reports))?;
    let boxes = out_dir.join(BOXPLOTS_FILE);
    std::fs::write(&boxes, boxplots_svg(reports))?;
    Ok(vec![table, pr, boxes])
}
