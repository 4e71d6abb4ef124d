//! Report documents: one header line carrying the timestamp, then a JSON body.
//!
//! The body depends only on the configuration and seed, so two runs can be compared
//! byte for byte with [`read_body`].

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::eval::EvalReport;

pub const HEADER_PREFIX: &str = "# coeba report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub dataset: String,
    pub config: BTreeMap<String, String>,
    pub report: EvalReport,
}

impl RunReport {
    pub fn new(label: &str, cfg: &ExperimentConfig, report: EvalReport) -> Self {
        let config = crate::config::KEYS
            .iter()
            .filter(|k| !k.starts_with("data.") && **k != "train.workers")
            .map(|k| (k.to_string(), cfg.get(k).unwrap_or_default()))
            .collect();
        RunReport {
            label: label.to_string(),
            dataset: cfg.data.name.clone(),
            config,
            report,
        }
    }
}

/// One row of an aggregate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub path: String,
    pub hits10_mean: f64,
    pub hits10_std: f64,
}

impl SummaryRow {
    pub fn from_run(path: &str, run: &RunReport) -> Self {
        let s = run.report.hits_at_k.get(&10).copied().unwrap_or(crate::eval::Summary {
            mean: f64::NAN,
            std: f64::NAN,
        });
        SummaryRow {
            label: run.label.clone(),
            path: path.to_string(),
            hits10_mean: s.mean,
            hits10_std: s.std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub dataset: String,
    pub rows: Vec<SummaryRow>,
}

pub fn render<T: Serialize>(body: &T) -> Result<String> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let json = serde_json::to_string_pretty(body).map_err(|e| Error::Shape(format!("report serialisation: {e}")))?;
    Ok(format!("{HEADER_PREFIX} generated_unix={secs}\n{json}\n"))
}

pub fn write<T: Serialize>(path: impl AsRef<Path>, body: &T) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render(body)?).map_err(|e| Error::io(path, e))
}

/// The report text without its header line.
pub fn read_body(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(strip_header(&text).to_string())
}

pub fn strip_header(text: &str) -> &str {
    match text.split_once('\n') {
        Some((first, rest)) if first.starts_with(HEADER_PREFIX) => rest,
        _ => text,
    }
}

pub fn read_run(path: impl AsRef<Path>) -> Result<RunReport> {
    let path = path.as_ref();
    let body = read_body(path)?;
    serde_json::from_str(&body).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() + 1,
        msg: e.to_string(),
    })
}
