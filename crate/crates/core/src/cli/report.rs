//! JSON-lines run reports.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rtsms::{PhaseTimes, RunReport};

/// One compression run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    /// Always `"record"`.
    pub kind: String,
    #[serde(flatten)]
    pub run: RunReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat: Option<usize>,
}

impl ReportRecord {
    pub fn new(run: RunReport) -> Self {
        Self {
            kind: "record".into(),
            run,
            suite: None,
            dims: None,
            repeat: None,
        }
    }
}

/// Summary over the repeats of one benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    /// Always `"aggregate"`.
    pub kind: String,
    pub suite: String,
    pub dims: Vec<usize>,
    pub algorithm: String,
    pub tol: Option<f64>,
    pub ranks: Option<Vec<usize>>,
    pub repeats: usize,
    pub mean_seconds: f64,
    pub geomean_residual: Option<f64>,
    /// Per-mode average of the returned ranks, rounded to the nearest integer.
    pub mean_ranks: Vec<usize>,
}

impl AggregateRecord {
    /// Summarizes a nonempty group of records of the same configuration.
    pub fn from_records(suite: &str, dims: &[usize], records: &[RunReport]) -> Self {
        let first = &records[0];
        let residuals: Option<Vec<f64>> = records.iter().map(|r| r.relative_residual).collect();
        let ranks: Vec<Vec<usize>> = records
            .iter()
            .map(|r| r.ranks_thresholded.clone())
            .collect();
        Self {
            kind: "aggregate".into(),
            suite: suite.into(),
            dims: dims.to_vec(),
            algorithm: first.algorithm.clone(),
            tol: first.tol,
            ranks: first.ranks.clone(),
            repeats: records.len(),
            mean_seconds: records.iter().map(|r| r.seconds.total).sum::<f64>()
                / records.len() as f64,
            geomean_residual: residuals.map(|r| geometric_mean(&r)),
            mean_ranks: rounded_mean_ranks(&ranks),
        }
    }
}

/// Geometric mean of positive values. Zeros give zero.
pub fn geometric_mean(values: &[f64]) -> f64 {
    if values.contains(&0.0) {
        return 0.0;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

/// Per-mode mean of rank vectors, rounded half away from zero.
pub fn rounded_mean_ranks(ranks: &[Vec<usize>]) -> Vec<usize> {
    let Some(first) = ranks.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|m| {
            let mean = ranks.iter().map(|r| r[m] as f64).sum::<f64>() / ranks.len() as f64;
            mean.round() as usize
        })
        .collect()
}

/// Replaces all timings with zeros so that reports of seeded runs compare
/// byte for byte.
pub fn strip_timings(report: &mut RunReport) {
    report.seconds = PhaseTimes::default();
}

/// Appends one JSON object per line.
pub fn append_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).map_err(std::io::Error::from)?;
        buf.push(b'\n');
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_helpers() {
        assert!((geometric_mean(&[1e-4, 1e-6]) / 1e-5 - 1.0).abs() <= 1e-12);
        assert_eq!(geometric_mean(&[0.0, 1.0]), 0.0);
        let ranks = vec![vec![5, 4], vec![5, 5], vec![4, 5], vec![5, 4], vec![4, 5]];
        assert_eq!(rounded_mean_ranks(&ranks), vec![5, 5]);
        let ranks = vec![vec![4], vec![5], vec![5], vec![5], vec![4]];
        assert_eq!(rounded_mean_ranks(&ranks), vec![5]);
        assert!(rounded_mean_ranks(&[]).is_empty());
    }

    #[test]
    fn record_serialization() {
        let mut run = RunReport::new("rtsms", 7);
        run.tol = Some(1e-6);
        run.ranks_raw = vec![5, 5, 5];
        run.ranks_thresholded = vec![3, 3, 3];
        run.relative_residual = Some(2.5e-7);
        run.seconds.total = 0.25;
        let rec = ReportRecord::new(run.clone());
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.starts_with(r#"{"kind":"record","algorithm":"rtsms""#));
        assert!(line.contains(r#""seconds":{"sketch":0.0"#));
        assert!(!line.contains("suite"));
        let back: ReportRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);

        let agg = AggregateRecord::from_records("runge", &[10, 10, 10], &[run.clone(), run]);
        assert_eq!(agg.repeats, 2);
        assert_eq!(agg.mean_ranks, vec![3, 3, 3]);
        assert_eq!(agg.mean_seconds, 0.25);
        let v: serde_json::Value = serde_json::to_value(&agg).unwrap();
        assert_eq!(v["kind"], "aggregate");
    }
}
