use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// One evaluation point. CSV header is exactly these field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub env_steps: usize,
    pub success_rate: f64,
    pub successful_nontrivial_count: usize,
    pub his_inserted_count: usize,
    pub her_inserted_count: usize,
    pub buffer_fill: usize,
    pub wall_clock_s: f64,
    pub q_loss: Option<f64>,
    pub policy_loss: Option<f64>,
    pub entropy_coef: Option<f64>,
    pub mean_q: Option<f64>,
}

pub const METRICS_HEADER: [&str; 12] = [
    "episode",
    "env_steps",
    "success_rate",
    "successful_nontrivial_count",
    "his_inserted_count",
    "her_inserted_count",
    "buffer_fill",
    "wall_clock_s",
    "q_loss",
    "policy_loss",
    "entropy_coef",
    "mean_q",
];

pub fn metrics_to_csv(rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Structural(format!("csv writer: {e}")))
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_atomic(path, &metrics_to_csv(rows)?)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != METRICS_HEADER {
        return Err(Error::format(path, format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<MetricsRow>, _>>()
        .map_err(|e| Error::format(path, e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Structural(format!("csv: {e}"))
}
