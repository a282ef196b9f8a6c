//! CSV ingestion and emission for the documented SCADA schema:
//!
//! `timestamp,ws_min,ws_mean,ws_max,rs_min,rs_mean,rs_max,p_min,p_mean,p_max,stator_t,rotor_t,incident`
//!
//! Timestamps are ISO-8601 UTC on the 10-minute grid; `incident` is 0/1.
//! Malformed rows are rejected with their line number, never silently dropped.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use super::types::{
    format_timestamp, parse_timestamp, Channel, ScadaRecord, ScadaSeries, TurbineSpec, N_CHANNELS,
};

pub const CSV_HEADER: &str =
    "timestamp,ws_min,ws_mean,ws_max,rs_min,rs_mean,rs_max,p_min,p_mean,p_max,stator_t,rotor_t,incident";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing or wrong header: expected {expected:?}, got {got:?}")]
    BadHeader { expected: String, got: String },
    #[error("no records in file")]
    NoRecords,
    #[error("line {line}: {message}")]
    BadRow { line: usize, message: String },
    #[error("line {line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { line: usize, timestamp: String },
    #[error("line {line}: timestamps not increasing ({prev} then {cur})")]
    NonMonotoneTime {
        line: usize,
        prev: String,
        cur: String,
    },
    #[error("invalid turbine spec: {0}")]
    BadSpec(String),
}

/// Load and validate a SCADA series from a CSV file.
pub fn load_scada(path: &Path, spec: &TurbineSpec) -> Result<ScadaSeries, CsvError> {
    spec.validate().map_err(CsvError::BadSpec)?;
    let text = fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scada_csv(&text, &spec.turbine_id)
}

/// Parse CSV text into a validated series (exposed for tests and in-memory use).
pub fn parse_scada_csv(text: &str, turbine_id: &str) -> Result<ScadaSeries, CsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CsvError::NoRecords)?;
    if header.trim_end() != CSV_HEADER {
        return Err(CsvError::BadHeader {
            expected: CSV_HEADER.to_string(),
            got: header.to_string(),
        });
    }
    let mut records: Vec<ScadaRecord> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1; // 1-based, header is line 1
        let row = raw.trim_end();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != N_CHANNELS + 2 {
            return Err(CsvError::BadRow {
                line,
                message: format!("expected {} columns, got {}", N_CHANNELS + 2, fields.len()),
            });
        }
        let timestamp = parse_timestamp(fields[0]).map_err(|message| CsvError::BadRow {
            line,
            message,
        })?;
        let mut values = [0.0; N_CHANNELS];
        for (i, v) in values.iter_mut().enumerate() {
            *v = fields[i + 1].parse::<f64>().map_err(|_| CsvError::BadRow {
                line,
                message: format!("column {} is not a number: {:?}", Channel::ALL[i].csv_name(), fields[i + 1]),
            })?;
        }
        let incident = match fields[N_CHANNELS + 1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(CsvError::BadRow {
                    line,
                    message: format!("incident flag must be 0 or 1, got {other:?}"),
                })
            }
        };
        let record = ScadaRecord {
            timestamp,
            values,
            incident,
        };
        record.validate().map_err(|e| CsvError::BadRow {
            line,
            message: e.to_string(),
        })?;
        if let Some(prev) = records.last() {
            if record.timestamp == prev.timestamp {
                return Err(CsvError::DuplicateTimestamp {
                    line,
                    timestamp: format_timestamp(record.timestamp),
                });
            }
            if record.timestamp < prev.timestamp {
                return Err(CsvError::NonMonotoneTime {
                    line,
                    prev: format_timestamp(prev.timestamp),
                    cur: format_timestamp(record.timestamp),
                });
            }
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(CsvError::NoRecords);
    }
    Ok(ScadaSeries::new(turbine_id, records))
}

/// Write a series in the documented schema. Values are emitted with three
/// decimals, which round-trips the exact zero and rated-power states.
pub fn write_scada(path: &Path, series: &ScadaSeries) -> Result<(), CsvError> {
    let mut out = String::with_capacity(series.len() * 96 + CSV_HEADER.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &series.records {
        out.push_str(&format_timestamp(r.timestamp));
        for v in r.values {
            out.push(',');
            out.push_str(&format!("{v:.3}"));
        }
        out.push(',');
        out.push(if r.incident { '1' } else { '0' });
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Write the per-record ground-truth label sidecar (`timestamp,label`).
pub fn write_labels(path: &Path, series: &ScadaSeries, labels: &[bool]) -> Result<(), CsvError> {
    assert_eq!(series.len(), labels.len(), "label vector length mismatch");
    let mut out = String::from("timestamp,label\n");
    for (r, l) in series.records.iter().zip(labels) {
        out.push_str(&format_timestamp(r.timestamp));
        out.push(',');
        out.push(if *l { '1' } else { '0' });
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Load a label sidecar back into `(timestamps, labels)`.
pub fn load_labels(path: &Path) -> Result<(Vec<i64>, Vec<bool>), CsvError> {
    let text = fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CsvError::NoRecords)?;
    if header.trim_end() != "timestamp,label" {
        return Err(CsvError::BadHeader {
            expected: "timestamp,label".into(),
            got: header.into(),
        });
    }
    let mut ts = Vec::new();
    let mut labels = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim_end();
        if row.is_empty() {
            continue;
        }
        let (t, l) = row.split_once(',').ok_or_else(|| CsvError::BadRow {
            line,
            message: "expected 2 columns".into(),
        })?;
        ts.push(parse_timestamp(t).map_err(|message| CsvError::BadRow { line, message })?);
        labels.push(match l {
            "0" => false,
            "1" => true,
            other => {
                return Err(CsvError::BadRow {
                    line,
                    message: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        });
    }
    Ok((ts, labels))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CsvError> {
    let io_err = |source| CsvError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}
