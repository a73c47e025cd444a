//! Plain-text ledger export.
//!
//! ```text
//! # dpgan moments ledger v1
//! grid 1 2 3 ... 64
//! event sigma=1.086 q=0.0010884 count=1 groups=1 mode=sound n_param=1185
//! alpha 1 0.0000123
//! ...
//! ```
//!
//! Importing replays the events and checks the replayed `alpha` against the
//! recorded values bit for bit.

use std::fmt::Write;

use super::{AccountingMode, LogMomentLedger, NoiseEvent};
use crate::error::{Error, Result};

const HEADER: &str = "# dpgan moments ledger v1";

impl LogMomentLedger {
    pub fn export(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{HEADER}").unwrap();
        let grid: Vec<String> = self.grid().iter().map(u32::to_string).collect();
        writeln!(out, "grid {}", grid.join(" ")).unwrap();
        for e in self.history() {
            writeln!(
                out,
                "event sigma={:?} q={:?} count={} groups={} mode={} n_param={}",
                e.sigma, e.q, e.count, e.groups, e.mode, e.n_param
            )
            .unwrap();
        }
        for (l, a) in self.grid().iter().zip(self.alpha()) {
            writeln!(out, "alpha {l} {a:?}").unwrap();
        }
        out
    }

    /// Rebuilds a ledger from [`LogMomentLedger::export`] output and verifies
    /// the recorded moments.
    pub fn import(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, msg: String| Error::Format { offset: line, msg };
        match lines.next() {
            Some((_, HEADER)) => {}
            _ => return Err(bad(0, "missing ledger header".into())),
        }
        let mut ledger: Option<LogMomentLedger> = None;
        let mut recorded = Vec::new();
        for (no, line) in lines {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("grid") => {
                    let grid = parts
                        .map(|t| t.parse::<u32>().map_err(|e| bad(no, e.to_string())))
                        .collect::<Result<Vec<_>>>()?;
                    ledger = Some(LogMomentLedger::with_grid(grid)?);
                }
                Some("event") => {
                    let l = ledger
                        .as_mut()
                        .ok_or_else(|| bad(no, "event before grid".into()))?;
                    l.accumulate(parse_event(parts).map_err(|m| bad(no, m))?)?;
                }
                Some("alpha") => {
                    let v: Vec<&str> = parts.collect();
                    if v.len() != 2 {
                        return Err(bad(no, "alpha line needs order and value".into()));
                    }
                    let a: f64 = v[1]
                        .parse()
                        .map_err(|_| bad(no, format!("bad value {}", v[1])))?;
                    recorded.push(a);
                }
                None => {}
                Some(other) => return Err(bad(no, format!("unknown record `{other}`"))),
            }
        }
        let ledger = ledger.ok_or_else(|| bad(0, "no grid line".into()))?;
        if recorded.len() != ledger.grid().len()
            || recorded
                .iter()
                .zip(ledger.alpha())
                .any(|(r, a)| r.to_bits() != a.to_bits())
        {
            return Err(Error::Accounting(
                "recorded alpha does not match the replayed events".into(),
            ));
        }
        Ok(ledger)
    }
}

fn parse_event<'a>(
    fields: impl Iterator<Item = &'a str>,
) -> std::result::Result<NoiseEvent, String> {
    let mut e = NoiseEvent::new(0.0, 0.0, 0);
    for f in fields {
        let (k, v) = f
            .split_once('=')
            .ok_or_else(|| format!("bad field `{f}`"))?;
        let err = || format!("bad value for {k}: `{v}`");
        match k {
            "sigma" => e.sigma = v.parse().map_err(|_| err())?,
            "q" => e.q = v.parse().map_err(|_| err())?,
            "count" => e.count = v.parse().map_err(|_| err())?,
            "groups" => e.groups = v.parse().map_err(|_| err())?,
            "n_param" => e.n_param = v.parse().map_err(|_| err())?,
            "mode" => e.mode = v.parse::<AccountingMode>().map_err(|e| e.to_string())?,
            _ => return Err(format!("unknown field `{k}`")),
        }
    }
    Ok(e)
}
