use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::EnvClass;
use crate::error::{Error, Result};
use crate::probe::mean_std;

pub const ALL_ENV: &str = "ALL-ENV";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DcAccuracy,
    NpiAcceptability,
    MedianRank,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::DcAccuracy => "dc_accuracy",
            Metric::NpiAcceptability => "npi_acceptability",
            Metric::MedianRank => "median_rank",
        })
    }
}

/// One measurement. Per-seed records carry `seed`; aggregates over seeds
/// have `seed: None` and a population `std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub variant: String,
    pub seed: Option<u64>,
    pub env_class: String,
    pub metric: Metric,
    pub value: f64,
    pub std: Option<f64>,
    /// Test examples or pairs behind a per-seed value; number of seeds for
    /// an aggregate.
    pub n: usize,
    /// Pairs skipped because a token was out of vocabulary.
    pub skipped: usize,
}

impl ResultRecord {
    pub fn is_aggregate(&self) -> bool {
        self.seed.is_none()
    }
}

/// Appends mean/std aggregates for every (experiment, variant, class,
/// metric) group, in order of first appearance.
pub fn with_aggregates(records: Vec<ResultRecord>) -> Vec<ResultRecord> {
    let mut keys: Vec<(String, String, String, Metric)> = Vec::new();
    for r in records.iter().filter(|r| !r.is_aggregate()) {
        let key = (r.experiment.clone(), r.variant.clone(), r.env_class.clone(), r.metric);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = records.clone();
    for (experiment, variant, env_class, metric) in keys {
        let group: Vec<&ResultRecord> = records
            .iter()
            .filter(|r| {
                !r.is_aggregate()
                    && r.experiment == experiment
                    && r.variant == variant
                    && r.env_class == env_class
                    && r.metric == metric
            })
            .collect();
        let values: Vec<f64> = group.iter().map(|r| r.value).collect();
        let (mean, std) = mean_std(&values);
        out.push(ResultRecord {
            experiment,
            variant,
            seed: None,
            env_class,
            metric,
            value: mean,
            std: Some(std),
            n: group.len(),
            skipped: group.iter().map(|r| r.skipped).sum(),
        });
    }
    out
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const GRID_FILE: &str = "grid.csv";

pub fn grid_columns() -> Vec<String> {
    std::iter::once(ALL_ENV.to_string())
        .chain(EnvClass::ALL.iter().map(|e| e.name().to_string()))
        .collect()
}

/// Variant x class pivot of the aggregate records: one `mean` and one `std`
/// row per (experiment, variant, metric), ten value columns.
pub fn grid_csv(records: &[ResultRecord]) -> String {
    let columns = grid_columns();
    let mut out = format!("experiment,variant,metric,stat,{}\n", columns.join(","));
    let mut rows: Vec<(String, String, Metric)> = Vec::new();
    for r in records.iter().filter(|r| r.is_aggregate()) {
        let key = (r.experiment.clone(), r.variant.clone(), r.metric);
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    for (experiment, variant, metric) in rows {
        for stat in ["mean", "std"] {
            let cells: Vec<String> = columns
                .iter()
                .map(|col| {
                    records
                        .iter()
                        .find(|r| {
                            r.is_aggregate()
                                && r.experiment == experiment
                                && r.variant == variant
                                && r.metric == metric
                                && &r.env_class == col
                        })
                        .map(|r| {
                            let v = if stat == "mean" { r.value } else { r.std.unwrap_or(0.0) };
                            format!("{v}")
                        })
                        .unwrap_or_default()
                })
                .collect();
            out.push_str(&format!(
                "{experiment},{variant},{metric},{stat},{}\n",
                cells.join(",")
            ));
        }
    }
    out
}

/// Writes `records.jsonl` and `grid.csv` into `dir`.
pub fn emit_report(records: &[ResultRecord], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(RECORDS_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Serde(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let grid = dir.join(GRID_FILE);
    fs::write(&grid, grid_csv(records)).map_err(|e| Error::io(&grid, e))
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Serde(e.to_string())))
        .collect()
}
