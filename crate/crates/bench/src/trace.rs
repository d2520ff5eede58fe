//! Per-trial trace files and residual threshold crossings.

use std::io::{Read, Write};

use rsqo::IterationRecord;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const COLUMNS: [&str; 10] = [
    "iter",
    "time_s",
    "f",
    "merit",
    "residual",
    "rho",
    "alpha",
    "step_norm",
    "backtracks",
    "qp_status",
];

/// Decade exponents whose first crossing is reported, from `10^1` down to `10^-13`.
pub const DECADES: std::ops::RangeInclusive<i32> = -13..=1;

/// Writes one row per iteration; `iter` counts completed iterations. Floats
/// use the shortest exponent form that reads back exactly.
pub fn write_trace<W: Write>(out: W, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record([
            (r.k + 1).to_string(),
            format!("{:e}", r.time_s),
            format!("{:e}", r.f),
            format!("{:e}", r.merit),
            format!("{:e}", r.residual),
            format!("{:e}", r.rho),
            format!("{:e}", r.alpha),
            format!("{:e}", r.step_norm),
            r.backtracks.to_string(),
            r.qp_status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub time_s: f64,
    pub f: f64,
    pub merit: f64,
    pub residual: f64,
    pub rho: f64,
    pub alpha: f64,
    pub step_norm: f64,
    pub backtracks: usize,
    pub qp_status: String,
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub threshold: f64,
    /// First recorded time with residual at or below the threshold; zero when
    /// the start already was, absent when never reached.
    pub time_s: Option<f64>,
}

pub fn crossings(initial_residual: f64, records: &[IterationRecord]) -> Vec<Crossing> {
    DECADES
        .rev()
        .map(|e| {
            let threshold = 10f64.powi(e);
            let time_s = if initial_residual <= threshold {
                Some(0.0)
            } else {
                records
                    .iter()
                    .find(|r| r.residual <= threshold)
                    .map(|r| r.time_s)
            };
            Crossing { threshold, time_s }
        })
        .collect()
}
