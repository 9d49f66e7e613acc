//! Experiment results and their textual renderings.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Metric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub metric: Metric,
    /// One value per replication.
    pub values: Vec<f64>,
    pub mean: f64,
}

impl MetricValues {
    pub fn new(metric: Metric, values: Vec<f64>) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        MetricValues { metric, values, mean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok { metrics: Vec<MetricValues> },
    Failed { reason: String },
}

/// One (dataset, sampler, classifier) combination across all replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub sampler: String,
    pub classifier: String,
    pub outcome: CellOutcome,
}

impl CellResult {
    pub fn mean(&self, metric: Metric) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Ok { metrics } => metrics.iter().find(|m| m.metric == metric).map(|m| m.mean),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn values(&self, metric: Metric) -> Option<&[f64]> {
        match &self.outcome {
            CellOutcome::Ok { metrics } => metrics.iter().find(|m| m.metric == metric).map(|m| m.values.as_slice()),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Samplers with the highest mean for a (dataset, classifier, metric) group.
/// Exact ties list every winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Best {
    pub dataset: String,
    pub classifier: String,
    pub metric: Metric,
    pub samplers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub best: Vec<Best>,
}

impl Report {
    pub fn new(config: ExperimentConfig, cells: Vec<CellResult>) -> Self {
        let mut best = Vec::new();
        for ds in &config.datasets {
            for cls in &config.classifiers {
                for &metric in &config.metrics {
                    let group: Vec<(&str, f64)> = cells
                        .iter()
                        .filter(|c| c.dataset == ds.name && c.classifier == cls.name())
                        .filter_map(|c| c.mean(metric).map(|m| (c.sampler.as_str(), m)))
                        .collect();
                    let Some(top) = group.iter().map(|g| g.1).reduce(f64::max) else {
                        continue;
                    };
                    best.push(Best {
                        dataset: ds.name.clone(),
                        classifier: cls.name().to_string(),
                        metric,
                        samplers: group.iter().filter(|g| g.1 == top).map(|g| g.0.to_string()).collect(),
                    });
                }
            }
        }
        Report { config, cells, best }
    }

    pub fn cell(&self, dataset: &str, sampler: &str, classifier: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.sampler == sampler && c.classifier == classifier)
    }

    pub fn is_best(&self, dataset: &str, sampler: &str, classifier: &str, metric: Metric) -> bool {
        self.best.iter().any(|b| {
            b.dataset == dataset && b.classifier == classifier && b.metric == metric && b.samplers.iter().any(|s| s == sampler)
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Long format, one row per (cell, metric, replication).
    Csv,
    /// One row per (cell, metric) with the mean and best marker.
    SummaryCsv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "summary" | "summary-csv" => Ok(ReportFormat::SummaryCsv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" | "markdown-table" => Ok(ReportFormat::Markdown),
            other => Err(Error::Argument(format!("unknown report format `{other}`"))),
        }
    }
}

pub fn emit_report(report: &Report, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => observations_csv(report),
        ReportFormat::SummaryCsv => summary_csv(report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Markdown => Ok(markdown(report)),
    }
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

fn observations_csv(report: &Report) -> Result<String> {
    csv_string(|w| {
        w.write_record(["dataset", "sampler", "classifier", "metric", "rep_index", "value"])?;
        for cell in &report.cells {
            for &metric in &report.config.metrics {
                let head = [cell.dataset.as_str(), cell.sampler.as_str(), cell.classifier.as_str(), metric.name()];
                match cell.values(metric) {
                    Some(values) => {
                        for (rep, v) in values.iter().enumerate() {
                            w.write_record(head.iter().copied().chain([rep.to_string().as_str(), v.to_string().as_str()]))?;
                        }
                    }
                    None => w.write_record(head.iter().copied().chain(["", "na"]))?,
                }
            }
        }
        Ok(())
    })
}

fn summary_csv(report: &Report) -> Result<String> {
    csv_string(|w| {
        w.write_record(["dataset", "sampler", "classifier", "metric", "mean", "best", "note"])?;
        for cell in &report.cells {
            for &metric in &report.config.metrics {
                let head = [cell.dataset.as_str(), cell.sampler.as_str(), cell.classifier.as_str(), metric.name()];
                let (mean, note) = match (&cell.outcome, cell.mean(metric)) {
                    (_, Some(m)) => (m.to_string(), String::new()),
                    (CellOutcome::Failed { reason }, None) => ("na".to_string(), reason.clone()),
                    (CellOutcome::Ok { .. }, None) => ("na".to_string(), String::new()),
                };
                let best = report.is_best(&cell.dataset, &cell.sampler, &cell.classifier, metric);
                w.write_record(head.iter().copied().chain([mean.as_str(), if best { "1" } else { "0" }, note.as_str()]))?;
            }
        }
        Ok(())
    })
}

/// One table per classifier: rows are (dataset, metric), columns samplers,
/// best mean in bold.
fn markdown(report: &Report) -> String {
    let mut out = String::new();
    let samplers: Vec<&str> = report.config.samplers.iter().map(|s| s.name()).collect();
    for (ci, cls) in report.config.classifiers.iter().enumerate() {
        if ci > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "### {}\n", cls.name());
        let _ = writeln!(out, "| dataset | metric | {} |", samplers.join(" | "));
        let _ = writeln!(out, "|---|---|{}", "---:|".repeat(samplers.len()));
        for ds in &report.config.datasets {
            for &metric in &report.config.metrics {
                let _ = write!(out, "| {} | {} |", ds.name, metric);
                for s in &samplers {
                    let text = match report.cell(&ds.name, s, cls.name()).and_then(|c| c.mean(metric)) {
                        Some(m) if report.is_best(&ds.name, s, cls.name(), metric) => format!("**{m:.3}**"),
                        Some(m) => format!("{m:.3}"),
                        None => "na".to_string(),
                    };
                    let _ = write!(out, " {text} |");
                }
                out.push('\n');
            }
        }
    }
    out
}
