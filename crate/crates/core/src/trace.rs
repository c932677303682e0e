//! Per-round trace records and their CSV form.
//!
//! Header: `t,lambda_0..,excess_0..,F,G,avg_excess_0..[,oracle_gap]`. Reals are
//! written in scientific notation with 17 significant digits so that a trace
//! read back is bit-identical to the one written.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub lambda: Vec<f64>,
    /// Excess supply observed at `lambda`.
    pub excess: Vec<f64>,
    /// Profit at the stimulated plan.
    #[serde(rename = "F")]
    pub primal: f64,
    /// Dual value at `lambda`.
    #[serde(rename = "G")]
    pub dual: f64,
    pub running_avg_excess: Vec<f64>,
    pub oracle_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunningMean {
    sum: Vec<f64>,
    count: u64,
}

impl RunningMean {
    pub fn new(d: usize) -> Self {
        Self { sum: vec![0.0; d], count: 0 }
    }

    pub fn push(&mut self, v: &[f64]) {
        for (s, x) in self.sum.iter_mut().zip(v) {
            *s += x;
        }
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }
}

pub fn csv_header(d: usize, with_oracle: bool) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..d).map(|k| format!("lambda_{k}")));
    cols.extend((0..d).map(|k| format!("excess_{k}")));
    cols.push("F".into());
    cols.push("G".into());
    cols.extend((0..d).map(|k| format!("avg_excess_{k}")));
    if with_oracle {
        cols.push("oracle_gap".into());
    }
    cols
}

pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(writer: W, trace: &[TraceRecord]) -> Result<()> {
    let first = trace.first().ok_or_else(|| Error::InvalidConfig("cannot write an empty trace".into()))?;
    let d = first.lambda.len();
    let with_oracle = first.oracle_gap.is_some();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header(d, with_oracle))?;
    for rec in trace {
        if rec.lambda.len() != d || rec.excess.len() != d || rec.running_avg_excess.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: rec.lambda.len() });
        }
        if rec.oracle_gap.is_some() != with_oracle {
            return Err(Error::InvalidConfig("oracle_gap present on some records only".into()));
        }
        let mut row = vec![rec.t.to_string()];
        row.extend(rec.lambda.iter().map(|v| format_real(*v)));
        row.extend(rec.excess.iter().map(|v| format_real(*v)));
        row.push(format_real(rec.primal));
        row.push(format_real(rec.dual));
        row.extend(rec.running_avg_excess.iter().map(|v| format_real(*v)));
        if let Some(g) = rec.oracle_gap {
            row.push(format_real(g));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let cols = header.len();
    let with_oracle = header.last().map(|h| h == "oracle_gap").unwrap_or(false);
    let base = cols - usize::from(with_oracle);
    if base < 6 || !(base - 3).is_multiple_of(3) {
        return Err(Error::MalformedTrace { line: 1, reason: format!("unexpected column count {cols}") });
    }
    let d = (base - 3) / 3;
    if header != csv_header(d, with_oracle) {
        return Err(Error::MalformedTrace { line: 1, reason: "header does not match the trace schema".into() });
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let line = i + 2;
        let row = row?;
        if row.len() != cols {
            return Err(Error::MalformedTrace { line, reason: format!("expected {cols} fields, got {}", row.len()) });
        }
        let real = |j: usize| -> Result<f64> {
            row[j].parse::<f64>().map_err(|e| Error::MalformedTrace { line, reason: format!("column {j}: {e}") })
        };
        let t = row[0].parse::<u64>().map_err(|e| Error::MalformedTrace { line, reason: format!("t: {e}") })?;
        let vec_at = |start: usize| (start..start + d).map(real).collect::<Result<Vec<f64>>>();
        out.push(TraceRecord {
            t,
            lambda: vec_at(1)?,
            excess: vec_at(1 + d)?,
            primal: real(1 + 2 * d)?,
            dual: real(2 + 2 * d)?,
            running_avg_excess: vec_at(3 + 2 * d)?,
            oracle_gap: if with_oracle { Some(real(cols - 1)?) } else { None },
        });
    }
    Ok(out)
}
