//! Human- and machine-readable outputs: history and Kaplan–Meier CSVs,
//! aligned text tables and a small SVG step-curve plotter.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::evaluate::{CvReport, RecoveryReport};
use crate::neural::EpochRecord;
use crate::survival::{kaplan_meier, StepSurvivalCurve, SurvivalRecord};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,objective,statistic,penalty\n");
    for h in history {
        let _ = writeln!(out, "{},{},{},{}", h.epoch, h.objective, h.statistic, h.penalty);
    }
    out
}

/// Kaplan–Meier curve of every cluster that has at least one event.
pub fn cluster_curves(
    records: &[SurvivalRecord],
    labels: &[usize],
    k: usize,
) -> Vec<(usize, StepSurvivalCurve)> {
    (0..k)
        .filter_map(|g| {
            let members: Vec<SurvivalRecord> = records
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == g)
                .map(|(r, _)| *r)
                .collect();
            kaplan_meier(&members).ok().map(|c| (g, c))
        })
        .collect()
}

pub fn km_csv(curves: &[(usize, StepSurvivalCurve)]) -> String {
    let mut out = String::from("cluster,time,survival,ci_lower,ci_upper,at_risk,events\n");
    for (g, c) in curves {
        for j in 0..c.times.len() {
            let _ = writeln!(
                out,
                "{g},{},{},{},{},{},{}",
                c.times[j], c.survival[j], c.ci_lower[j], c.ci_upper[j], c.at_risk[j], c.events[j]
            );
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Step curves on a fixed 640×400 canvas, time on x, survival on y.
pub fn km_svg(curves: &[(usize, StepSurvivalCurve)]) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let t_max = curves
        .iter()
        .filter_map(|(_, c)| c.times.last().copied())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let x = |t: f64| pad + (w - 2.0 * pad) * t / t_max;
    let y = |s: f64| h - pad - (h - 2.0 * pad) * s;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{pad},{top} V{bottom} H{right}" stroke="black" fill="none"/>"#,
        top = pad,
        bottom = h - pad,
        right = w - pad
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">time (max {t_max:.0})</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">survival</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (g, c) in curves {
        let color = PALETTE[g % PALETTE.len()];
        let mut d = format!("M{:.2},{:.2}", x(0.0), y(1.0));
        let mut prev = 1.0;
        for (t, s) in c.times.iter().zip(&c.survival) {
            let _ = write!(d, " H{:.2} V{:.2}", x(*t), y(*s));
            prev = *s;
        }
        let _ = write!(d, " H{:.2}", x(t_max));
        let _ = writeln!(svg, r#"<path d="{d}" stroke="{color}" stroke-width="2" fill="none"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="11" fill="{color}">cluster {g}</text>"#,
            w - pad + 4.0,
            y(prev)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn fmt_p(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"))
}

/// Aligned text rendering of one recovery report.
pub fn recovery_text(title: &str, r: &RecoveryReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "  subjects          {}", r.n);
    let _ = writeln!(out, "  cluster sizes     {:?}", r.cluster_sizes);
    let _ = writeln!(out, "  logrank stat      {}", fmt_opt(r.hard_logrank_statistic));
    let _ = writeln!(out, "  logrank p         {}", fmt_p(r.hard_logrank_p));
    let _ = writeln!(out, "  c-index           {}", fmt_opt(r.c_index));
    if let Some(m) = &r.matching {
        let _ = writeln!(out, "  matching          {m:?}");
    }
    if let Some(acc) = r.accuracy {
        let _ = writeln!(out, "  accuracy          {acc:.4}");
    }
    if let Some(auc) = &r.auc_per_class {
        let cells: Vec<String> = auc.iter().map(|a| format!("{a:.4}")).collect();
        let _ = writeln!(out, "  AUC per class     {}", cells.join("  "));
    }
    if let Some(conf) = &r.confusion {
        let _ = writeln!(out, "  confusion (rows = truth, cols = predicted)");
        for (t, row) in conf.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>7.3}")).collect();
            let _ = writeln!(out, "    {t:>3} {}", cells.join(""));
        }
    }
    out
}

pub fn cv_text(report: &CvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4} {:>7} {:>7} {:>12} {:>12} {:>10} {:>8}",
        "fold", "train", "test", "objective0", "objective", "logrank p", "acc"
    );
    for f in &report.folds {
        let _ = writeln!(
            out,
            "{:>4} {:>7} {:>7} {:>12.3} {:>12.3} {:>10} {:>8}",
            f.fold,
            f.train_size,
            f.test_size,
            f.initial_objective,
            f.final_objective,
            fmt_p(f.report.hard_logrank_p),
            fmt_opt(f.report.accuracy)
        );
    }
    out.push('\n');
    out.push_str(&recovery_text("pooled withheld predictions", &report.pooled));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn km_csv_and_svg_render() {
        let records: Vec<SurvivalRecord> = (1..=6)
            .map(|i| SurvivalRecord::new(i as f64, i % 3 != 0).unwrap())
            .collect();
        let labels = [0, 1, 0, 1, 0, 2];
        let curves = cluster_curves(&records, &labels, 3);
        // cluster 2 has only a censored subject
        assert_eq!(curves.len(), 2);
        let csv = km_csv(&curves);
        assert!(csv.starts_with("cluster,time,survival"));
        assert_eq!(csv.lines().count(), 1 + 3 + 1);
        let svg = km_svg(&curves);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 3);
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&serde_json::json!({"a": 1, "b": [1.5, 2.0]})).unwrap();
        let b = config_hash(&serde_json::json!({"a": 1, "b": [1.5, 2.0]})).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn history_header() {
        let h = [EpochRecord {
            epoch: 1,
            objective: 2.5,
            statistic: 3.0,
            penalty: 5.0,
        }];
        assert_eq!(history_csv(&h), "epoch,objective,statistic,penalty\n1,2.5,3,5\n");
    }
}
