//! CSV record types. All files are comma separated with a header row and
//! LF line endings.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError};
use crate::env::snapshot::csv_writer;

/// Deterministic per-step training metrics, one row per policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub training_step: u64,
    pub policy: String,
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Wall-clock split of one training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub training_step: u64,
    pub wall_ms_env: f64,
    pub wall_ms_update: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionRow {
    pub step: u64,
    pub spread: f64,
    pub mean_opinion: f64,
}

/// One agent's view at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewRow {
    pub step: u64,
    pub values: Vec<f32>,
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Runtime(format!("{}: {e}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| csv_err(path, e))
}

/// Header `step,v0,...,v{k-1}`.
pub fn write_view_csv(path: &Path, rows: &[ViewRow]) -> Result<(), HarnessError> {
    let width = rows.first().map_or(0, |r| r.values.len());
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv_writer(BufWriter::new(file));
    let header: Vec<String> = std::iter::once("step".to_owned())
        .chain((0..width).map(|k| format!("v{k}")))
        .collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let record: Vec<String> = std::iter::once(r.step.to_string())
            .chain(r.values.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_view_csv(path: &Path) -> Result<Vec<ViewRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |f: &str| HarnessError::Runtime(format!("{}: bad value `{f}`", path.display()));
        let mut fields = rec.iter();
        let step = fields.next().ok_or_else(|| bad(""))?;
        rows.push(ViewRow {
            step: step.parse().map_err(|_| bad(step))?,
            values: fields
                .map(|f| f.parse().map_err(|_| bad(f)))
                .collect::<Result<_, _>>()?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![MetricsRow {
            training_step: 1,
            policy: "flock".into(),
            mean_reward: 0.1 + 0.2,
            policy_loss: -1e-9,
            value_loss: 123.456,
            entropy: -1.5,
            clip_fraction: 0.0,
        }];
        write_csv(&path, &rows).unwrap();
        assert_eq!(read_csv::<MetricsRow>(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("training_step,policy,mean_reward,policy_loss,value_loss,entropy,clip_fraction\n"));
    }

    #[test]
    fn view_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        let rows = vec![
            ViewRow {
                step: 1,
                values: vec![1.0, 0.25, 0.123_456_79],
            },
            ViewRow {
                step: 2,
                values: vec![0.0, 1.0, 1.0],
            },
        ];
        write_view_csv(&path, &rows).unwrap();
        assert_eq!(read_view_csv(&path).unwrap(), rows);
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("step,v0,v1,v2\n"));
    }
}
