//! Trajectory export as CSV: `t`, states, inputs, barrier values and the
//! filter status per sample.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use safebo::env::{EnvError, EpisodeTrace, SampleStatus};

use crate::experiment::RunFile;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(String),
    #[error("malformed trace file: {0}")]
    Malformed(String),
}

pub fn write_trace<W: Write>(trace: &EpisodeTrace, out: W) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace.header())?;
    for k in 0..trace.len() {
        let numbers = std::iter::once(trace.times[k])
            .chain(trace.states[k].iter().copied())
            .chain(trace.inputs[k].iter().copied())
            .chain(trace.barriers[k].iter().copied());
        let row: Vec<String> =
            numbers.map(|v| v.to_string()).chain(std::iter::once(trace.qp_status[k].as_str().to_string())).collect();
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| TraceError::Io(e.to_string()))
}

/// Parsed trace file: numeric columns per row plus the status column.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub status: Vec<SampleStatus>,
}

pub fn read_trace<R: Read>(input: R) -> Result<TraceTable, TraceError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.last().map(String::as_str) != Some("qp_status") {
        return Err(TraceError::Malformed("last column must be qp_status".into()));
    }
    let (mut rows, mut status) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let n = rec.len();
        let nums = rec
            .iter()
            .take(n - 1)
            .map(|s| s.parse::<f64>().map_err(|e| TraceError::Malformed(format!("{s}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let st = SampleStatus::parse(&rec[n - 1]).ok_or_else(|| TraceError::Malformed(format!("status {}", &rec[n - 1])))?;
        rows.push(nums);
        status.push(st);
    }
    Ok(TraceTable { header, rows, status })
}

/// Re-simulates entry `entry` of a run and writes its trajectory to `out`.
pub fn export_trace(run: &RunFile, entry: usize, out: &Path) -> Result<EpisodeTrace, TraceError> {
    let e = run
        .record
        .entries
        .get(entry)
        .ok_or_else(|| TraceError::NotFound(format!("entry {entry} (run has {})", run.record.entries.len())))?;
    if e.trace_id.is_empty() {
        return Err(TraceError::NotFound(format!("entry {entry} has no trace id")));
    }
    let trace = run.task.integrate_episode(&e.z_raw, run.record.seed)?;
    let file = std::fs::File::create(out).map_err(|e| TraceError::Io(format!("{}: {e}", out.display())))?;
    write_trace(&trace, file)?;
    Ok(trace)
}
