//! CSV output for traces and benchmark sweeps.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! runs give byte-identical files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::IterationRecord;
use crate::error::Result;

/// Residual thresholds used by benchmark sweeps: `1e-2, 1e-4, ..., 1e-10`.
pub const BENCH_THRESHOLDS: [f64; 5] = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10];

/// Header for a trace over `k` sets.
pub fn trace_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> =
        ["iter", "phase", "set_index", "step_norm", "residual_max"].iter().map(|s| s.to_string()).collect();
    h.extend((0..k).map(|l| format!("residual_{l}")));
    h.push("dist_oracle".into());
    h
}

pub fn write_trace<W: Write>(out: W, trace: &[IterationRecord], k: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(k))?;
    for r in trace {
        let mut row = vec![
            r.index.to_string(),
            r.phase.as_str().to_string(),
            r.set_index.map(|l| l.to_string()).unwrap_or_default(),
            r.step_norm.to_string(),
            r.residual_max().to_string(),
        ];
        row.extend(r.per_set_residuals.iter().map(f64::to_string));
        row.push(r.distance_to_oracle.map(|d| d.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(trace: &[IterationRecord], k: usize) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace, k)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One configuration of a sweep and the projection counts it needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub policy: String,
    pub iterations: usize,
    pub converged: bool,
    /// Projections needed to reach each of [`BENCH_THRESHOLDS`].
    pub counts: Vec<Option<usize>>,
}

impl BenchRow {
    /// Counts for every threshold from a residual curve indexed by the
    /// number of projections so far.
    pub fn from_curve(algorithm: String, policy: String, iterations: usize, converged: bool, curve: &[f64]) -> Self {
        let counts = BENCH_THRESHOLDS.iter().map(|t| curve.iter().position(|r| r <= t)).collect();
        Self { algorithm, policy, iterations, converged, counts }
    }
}

pub fn write_bench<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["algorithm".to_string(), "policy".into(), "iterations".into(), "converged".into()];
    header.extend(BENCH_THRESHOLDS.iter().map(|t| format!("proj_to_{t:e}")));
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![r.algorithm.clone(), r.policy.clone(), r.iterations.to_string(), r.converged.to_string()];
        row.extend(r.counts.iter().map(|c| c.map(|c| c.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn bench_to_string(rows: &[BenchRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_bench(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
