//! Line-delimited metric records.
//!
//! `iter=<n> phase=<p> d_loss=<x> g_loss=<x> epsilon=<x> delta=<x> bounds=<digest>`
//!
//! Floats are written in shortest round-trip form, so parsing a line and
//! formatting it again reproduces it byte for byte.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    NonPrivate,
    Warm,
    Dp,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::NonPrivate => "nonprivate",
            Phase::Warm => "warm",
            Phase::Dp => "dp",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonprivate" => Ok(Phase::NonPrivate),
            "warm" => Ok(Phase::Warm),
            "dp" => Ok(Phase::Dp),
            other => Err(Error::Format {
                offset: 0,
                msg: format!("unknown phase `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub iter: usize,
    pub phase: Phase,
    pub d_loss: f64,
    pub g_loss: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Clipping plan digest `k:min:max`, or `-` when nothing is clipped.
    pub bounds: String,
}

impl fmt::Display for MetricRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} phase={} d_loss={:?} g_loss={:?} epsilon={:?} delta={:?} bounds={}",
            self.iter, self.phase, self.d_loss, self.g_loss, self.epsilon, self.delta, self.bounds
        )
    }
}

const KEYS: [&str; 7] = [
    "iter", "phase", "d_loss", "g_loss", "epsilon", "delta", "bounds",
];

impl MetricRecord {
    fn parse_at(line: &str, offset: usize) -> Result<Self> {
        let bad = |msg: String| Error::Format { offset, msg };
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != KEYS.len() {
            return Err(bad(format!(
                "expected {} fields, got {}",
                KEYS.len(),
                fields.len()
            )));
        }
        let mut vals = [""; 7];
        for (slot, (field, key)) in vals.iter_mut().zip(fields.iter().zip(KEYS)) {
            *slot = field
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| bad(format!("expected `{key}=`, got `{field}`")))?;
        }
        let float = |i: usize| -> Result<f64> {
            vals[i]
                .parse()
                .map_err(|_| bad(format!("{}: bad number `{}`", KEYS[i], vals[i])))
        };
        Ok(MetricRecord {
            iter: vals[0]
                .parse()
                .map_err(|_| bad(format!("iter: `{}`", vals[0])))?,
            phase: vals[1]
                .parse()
                .map_err(|_| bad(format!("phase: `{}`", vals[1])))?,
            d_loss: float(2)?,
            g_loss: float(3)?,
            epsilon: float(4)?,
            delta: float(5)?,
            bounds: vals[6].to_string(),
        })
    }
}

impl FromStr for MetricRecord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_at(s, 0)
    }
}

/// Parses a metrics stream. Lines of other record types (for example a
/// score report starting with `scores`) are skipped.
pub fn parse_metrics(text: &str) -> Result<Vec<MetricRecord>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches('\n');
        if body.starts_with("iter=") {
            out.push(MetricRecord::parse_at(body, offset)?);
        }
        offset += line.len();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let r = MetricRecord {
            iter: 12,
            phase: Phase::Dp,
            d_loss: -0.1 + 0.2,
            g_loss: 1.0 / 3.0,
            epsilon: f64::INFINITY,
            delta: 1e-5,
            bounds: "1:1.0:1.0".into(),
        };
        let line = r.to_string();
        let back: MetricRecord = line.parse().unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_string(), line);
    }

    #[test]
    fn errors_carry_offsets() {
        let text = "iter=1 phase=dp d_loss=0.0 g_loss=0.0 epsilon=1.0 delta=0.1 bounds=-\niter=2 phase=xx d_loss=0.0 g_loss=0.0 epsilon=1.0 delta=0.1 bounds=-\n";
        match parse_metrics(text) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 69),
            other => panic!("{other:?}"),
        }
    }
}
