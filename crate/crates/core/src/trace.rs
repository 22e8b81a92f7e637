//! Per-step amplitude instrumentation.

use std::fmt::Write as _;
use std::io;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{Dim, StateVector};

pub const TRACE_CSV_HEADER: &str = "step,target_re,target_im,source_re,source_im,mean_re,mean_im,norm";

/// The source/target pair a trace watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub source: usize,
    pub target: usize,
}

impl Probe {
    pub fn new(source: usize, target: usize) -> Result<Self> {
        if source == target {
            return Err(Error::SourceEqualsTarget(source));
        }
        Ok(Self { source, target })
    }

    pub fn check(self, dim: Dim) -> Result<()> {
        dim.check_index(self.source)?;
        dim.check_index(self.target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub target: Complex64,
    pub source: Complex64,
    pub mean: Complex64,
    pub norm: f64,
}

impl TraceRecord {
    pub fn observe(step: u64, state: &StateVector, probe: Probe) -> Self {
        Self {
            step,
            target: state.amplitude(probe.target),
            source: state.amplitude(probe.source),
            mean: state.mean(),
            norm: state.norm_sqr().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub probe: Probe,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(probe: Probe) -> Self {
        Self {
            probe,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn target_magnitudes(&self) -> Vec<(u64, f64)> {
        self.records.iter().map(|r| (r.step, r.target.norm())).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.step,
                r.target.re,
                r.target.im,
                r.source.re,
                r.source.im,
                r.mean.re,
                r.mean.im,
                r.norm
            );
        }
        out
    }

    /// One JSON object per record with the CSV column names as keys.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = serde_json::json!({
                "step": r.step,
                "target_re": r.target.re,
                "target_im": r.target.im,
                "source_re": r.source.re,
                "source_im": r.source.im,
                "mean_re": r.mean.re,
                "mean_im": r.mean.im,
                "norm": r.norm,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// First local maximum of `|T|` whose magnitude exceeds `threshold`, as
/// `(step, magnitude)`. A run that is still rising at its last record reports
/// that record.
pub fn first_peak(samples: &[(u64, f64)], threshold: f64) -> Option<(u64, f64)> {
    let start = samples.iter().position(|&(_, m)| m > threshold)?;
    let mut best = samples[start];
    for &(step, m) in &samples[start + 1..] {
        if m < best.1 {
            break;
        }
        best = (step, m);
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let dim = Dim::new(4).unwrap();
        let probe = Probe::new(0, 3).unwrap();
        let mut tr = Trace::new(probe);
        let v = StateVector::uniform(dim);
        tr.push(TraceRecord::observe(0, &v, probe));
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_CSV_HEADER));
        assert_eq!(lines.next(), Some("0,0.5,0,0.5,0,0.5,0,1"));
        assert_eq!(lines.next(), None);

        let jl = tr.to_jsonl();
        let v: serde_json::Value = serde_json::from_str(jl.lines().next().unwrap()).unwrap();
        assert_eq!(v["target_re"], 0.5);
        assert_eq!(v["norm"], 1.0);
    }

    #[test]
    fn probe_rejects_equal_indices() {
        assert_eq!(Probe::new(2, 2), Err(Error::SourceEqualsTarget(2)));
        let p = Probe::new(0, 8).unwrap();
        assert!(p.check(Dim::new(8).unwrap()).is_err());
    }

    #[test]
    fn peak_detection() {
        let s = [(0, 0.1), (1, 0.6), (2, 0.9), (3, 0.95), (4, 0.7), (5, 0.99)];
        assert_eq!(first_peak(&s, 0.5), Some((3, 0.95)));
        assert_eq!(first_peak(&s, 0.99), None);
        assert_eq!(first_peak(&[(0, 0.2), (1, 0.8)], 0.5), Some((1, 0.8)));
    }
}
