//! Charts and their data sidecars, built from the CSV files of a results directory.

use std::path::Path;

use dalloc_core::simulator::CurveRecord;
use dalloc_core::stats;
use serde::{Deserialize, Serialize};

use crate::commands::{read_csv, write_csv, CURVES_FILE, ELASTICITY_FILE, ULCC_FILE, UNCERTAINTY_FILE};
use crate::error::{CliError, Result};
use crate::svg::{Chart, Series};

pub const LEARNING_CHART: &str = "learning_curves";
pub const ULCC_CHART: &str = "ulcc_curves";
pub const ELASTICITY_CHART: &str = "elasticity_curve";
pub const UNCERTAINTY_CHART: &str = "uncertainty_profile";

/// One row of a learning-curve sidecar: Monte Carlo mean of one policy at one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub batch: usize,
    pub policy: String,
    pub iterations: usize,
    pub mean_raw_abv: f64,
    pub mean_scaled_abv: f64,
    pub se_scaled_abv: f64,
}

/// Collapses per-iteration rows into per-(batch, policy) means, policies in
/// first-seen order.
pub fn aggregate_curves(records: &[CurveRecord]) -> Vec<CurvePoint> {
    let mut policies: Vec<&str> = Vec::new();
    for r in records {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let n_batches = records.iter().map(|r| r.batch + 1).max().unwrap_or(0);
    let mut out = Vec::new();
    for b in 0..n_batches {
        for p in &policies {
            let rows: Vec<&CurveRecord> = records.iter().filter(|r| r.batch == b && r.policy == *p).collect();
            if rows.is_empty() {
                continue;
            }
            let raw: Vec<f64> = rows.iter().map(|r| r.raw_abv).collect();
            let scaled: Vec<f64> = rows.iter().map(|r| r.scaled_abv).collect();
            out.push(CurvePoint {
                batch: b,
                policy: p.to_string(),
                iterations: rows.len(),
                mean_raw_abv: stats::mean(&raw),
                mean_scaled_abv: stats::mean(&scaled),
                se_scaled_abv: if rows.len() > 1 { stats::standard_error(&scaled) } else { 0.0 },
            });
        }
    }
    out
}

fn curve_series(points: &[CurvePoint]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for p in points {
        let pt = (p.batch as f64, p.mean_scaled_abv);
        match out.iter_mut().find(|s| s.label == p.policy) {
            Some(s) => s.points.push(pt),
            None => out.push(Series {
                label: p.policy.clone(),
                points: vec![pt],
            }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ElasticityRow {
    depth: f64,
    predicted: f64,
    truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct UncertaintyRow {
    depth: f64,
    sd: f64,
    sd_more_data: f64,
}

fn write_chart(dir: &Path, name: &str, chart: &Chart, hash: &str) -> Result<String> {
    let file = format!("{name}.svg");
    let path = dir.join(&file);
    std::fs::write(&path, chart.render(&format!("dalloc manifest {hash}"))).map_err(|e| CliError::write(&path, e))?;
    Ok(file)
}

/// Writes every chart whose input exists in `dir`, each with a `.csv` sidecar
/// holding the plotted values. Returns the file names written.
pub fn render_reports(dir: &Path, hash: &str) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for (input, name, title) in [
        (CURVES_FILE, LEARNING_CHART, "Learning curves (scaled to Random)"),
        (ULCC_FILE, ULCC_CHART, "TS-IP against the unconstrained-learner benchmark"),
    ] {
        let path = dir.join(input);
        if !path.exists() {
            continue;
        }
        let records: Vec<CurveRecord> = read_csv(&path)?;
        let points = aggregate_curves(&records);
        let chart = Chart {
            title: title.into(),
            x_label: "batch".into(),
            y_label: "scaled ABV".into(),
            series: curve_series(&points),
        };
        written.push(write_chart(dir, name, &chart, hash)?);
        let sidecar = format!("{name}.csv");
        write_csv(dir, &sidecar, &points)?;
        written.push(sidecar);
    }

    let path = dir.join(ELASTICITY_FILE);
    if path.exists() {
        let rows: Vec<ElasticityRow> = read_csv(&path)?;
        let chart = Chart {
            title: "Mean full-price value by discount depth".into(),
            x_label: "discount depth".into(),
            y_label: "full-price value".into(),
            series: vec![
                Series {
                    label: "model".into(),
                    points: rows.iter().map(|r| (r.depth, r.predicted)).collect(),
                },
                Series {
                    label: "ground truth".into(),
                    points: rows.iter().map(|r| (r.depth, r.truth)).collect(),
                },
            ],
        };
        written.push(write_chart(dir, ELASTICITY_CHART, &chart, hash)?);
        let sidecar = format!("{ELASTICITY_CHART}.csv");
        write_csv(dir, &sidecar, &rows)?;
        written.push(sidecar);
    }

    let path = dir.join(UNCERTAINTY_FILE);
    if path.exists() {
        let rows: Vec<UncertaintyRow> = read_csv(&path)?;
        let chart = Chart {
            title: "Predictive SD, trained on deep discounts only".into(),
            x_label: "discount depth".into(),
            y_label: "predictive SD".into(),
            series: vec![
                Series {
                    label: "base data".into(),
                    points: rows.iter().map(|r| (r.depth, r.sd)).collect(),
                },
                Series {
                    label: "10x data".into(),
                    points: rows.iter().map(|r| (r.depth, r.sd_more_data)).collect(),
                },
            ],
        };
        written.push(write_chart(dir, UNCERTAINTY_CHART, &chart, hash)?);
        let sidecar = format!("{UNCERTAINTY_CHART}.csv");
        write_csv(dir, &sidecar, &rows)?;
        written.push(sidecar);
    }

    if written.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no results to report (expected {CURVES_FILE}, {ULCC_FILE}, {ELASTICITY_FILE} or {UNCERTAINTY_FILE})",
            dir.display()
        )));
    }
    Ok(written)
}
