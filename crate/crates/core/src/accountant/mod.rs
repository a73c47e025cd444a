//! Moments accountant for the subsampled Gaussian mechanism.
//!
//! A [`LogMomentLedger`] keeps the accumulated log-moments `alpha(lambda)` on
//! an integer grid of orders. Composition is additive in `alpha`; `(eps,
//! delta)` guarantees follow from Markov's inequality,
//! `delta = min_lambda exp(alpha(lambda) - lambda eps)`.

mod export;
pub mod moments;
pub mod quadrature;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

pub use moments::{log_moments, subsampled_gaussian_log_moment};

use crate::error::{Error, Result};

/// Default moment orders `1..=64`.
pub fn default_grid() -> Vec<u32> {
    (1..=64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon0: f64,
    pub delta0: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon0: f64, delta0: f64) -> Result<Self> {
        if !(epsilon0 > 0.0) || !(delta0 > 0.0 && delta0 < 1.0) {
            return Err(Error::config(
                "privacy",
                format!("budget needs epsilon > 0 and 0 < delta < 1, got ({epsilon0}, {delta0})"),
            ));
        }
        Ok(PrivacyBudget { epsilon0, delta0 })
    }
}

/// How `k` separately clipped parameter groups are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccountingMode {
    /// The `k` noisy group releases form one Gaussian mechanism of
    /// sensitivity `sqrt(k)`; charged at noise multiplier `sigma / sqrt(k)`.
    #[default]
    Sound,
    /// Groups are treated as parallel composition and charged nothing extra.
    Paper,
}

impl fmt::Display for AccountingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccountingMode::Sound => "sound",
            AccountingMode::Paper => "paper",
        })
    }
}

impl FromStr for AccountingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sound" => Ok(AccountingMode::Sound),
            "paper" => Ok(AccountingMode::Paper),
            other => Err(Error::config(
                "accounting",
                format!("unknown mode `{other}`"),
            )),
        }
    }
}

/// Noise multiplier actually charged for a release of `groups` blocks.
pub fn effective_sigma(sigma: f64, groups: usize, mode: AccountingMode) -> f64 {
    match mode {
        AccountingMode::Paper => sigma,
        AccountingMode::Sound if groups <= 1 => sigma,
        AccountingMode::Sound => sigma / (groups as f64).sqrt(),
    }
}

/// `count` identical steps of the subsampled Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEvent {
    /// Noise stddev divided by the clipping bound.
    pub sigma: f64,
    /// Sampling ratio `m / n`.
    pub q: f64,
    pub count: u64,
    pub groups: usize,
    pub mode: AccountingMode,
    /// Number of privatised parameters; bookkeeping only.
    pub n_param: usize,
}

impl NoiseEvent {
    pub fn new(sigma: f64, q: f64, count: u64) -> Self {
        NoiseEvent {
            sigma,
            q,
            count,
            groups: 1,
            mode: AccountingMode::Sound,
            n_param: 0,
        }
    }

    pub fn grouped(mut self, groups: usize, mode: AccountingMode) -> Self {
        self.groups = groups;
        self.mode = mode;
        self
    }

    pub fn with_n_param(mut self, n_param: usize) -> Self {
        self.n_param = n_param;
        self
    }

    pub fn effective_sigma(&self) -> f64 {
        effective_sigma(self.sigma, self.groups, self.mode)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite())
            || !(self.q > 0.0 && self.q <= 1.0)
            || self.count == 0
            || self.groups == 0
        {
            return Err(Error::Accounting(format!("invalid noise event {self:?}")));
        }
        Ok(())
    }
}

/// `(q, sigma_eff)` as raw bits; both positive, so bit order is numeric order.
type MomentKey = (u64, u64);

/// Accumulated log-moments over a fixed grid of orders.
///
/// `alpha` is always recomputed from per-mechanism step totals in a fixed key
/// order, so it depends only on the multiset of events: splitting or
/// reordering events gives bit-identical results.
#[derive(Debug, Clone)]
pub struct LogMomentLedger {
    grid: Vec<u32>,
    alpha: Vec<f64>,
    history: Vec<NoiseEvent>,
    totals: BTreeMap<MomentKey, u64>,
    cache: HashMap<MomentKey, Vec<f64>>,
}

impl Default for LogMomentLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for LogMomentLedger {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.alpha == other.alpha && self.history == other.history
    }
}

impl LogMomentLedger {
    pub fn new() -> Self {
        Self::with_grid(default_grid()).expect("default grid is valid")
    }

    pub fn with_grid(grid: Vec<u32>) -> Result<Self> {
        if grid.is_empty() || grid.contains(&0) {
            return Err(Error::Accounting("grid must hold positive orders".into()));
        }
        Ok(LogMomentLedger {
            alpha: vec![0.0; grid.len()],
            grid,
            history: Vec::new(),
            totals: BTreeMap::new(),
            cache: HashMap::new(),
        })
    }

    pub fn grid(&self) -> &[u32] {
        &self.grid
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn history(&self) -> &[NoiseEvent] {
        &self.history
    }

    /// Total number of mechanism steps recorded (count-weighted).
    pub fn step_count(&self) -> u64 {
        self.history.iter().map(|e| e.count).sum()
    }

    fn moments_for(&mut self, key: MomentKey) -> Result<&Vec<f64>> {
        if !self.cache.contains_key(&key) {
            let v = log_moments(f64::from_bits(key.0), f64::from_bits(key.1), &self.grid)?;
            self.cache.insert(key, v);
        }
        Ok(&self.cache[&key])
    }

    pub fn accumulate(&mut self, event: NoiseEvent) -> Result<()> {
        event.validate()?;
        let key = (event.q.to_bits(), event.effective_sigma().to_bits());
        self.moments_for(key)?;
        *self.totals.entry(key).or_insert(0) += event.count;
        self.history.push(event);
        self.recompute();
        Ok(())
    }

    fn recompute(&mut self) {
        self.alpha.iter_mut().for_each(|a| *a = 0.0);
        for (key, &count) in &self.totals {
            let m = &self.cache[key];
            for (a, v) in self.alpha.iter_mut().zip(m) {
                *a += count as f64 * v;
            }
        }
    }

    /// Smallest `delta` certified at `epsilon`, clamped to `(0, 1]`.
    pub fn delta_for_epsilon(&self, epsilon: f64) -> f64 {
        let log_delta = self
            .grid
            .iter()
            .zip(&self.alpha)
            .map(|(&l, &a)| a - f64::from(l) * epsilon)
            .fold(f64::INFINITY, f64::min);
        log_delta.min(0.0).exp().max(f64::MIN_POSITIVE)
    }

    /// Smallest `epsilon` certified at `delta`.
    pub fn epsilon_for_delta(&self, delta: f64) -> f64 {
        let log_inv = -delta.ln();
        self.grid
            .iter()
            .zip(&self.alpha)
            .map(|(&l, &a)| (a + log_inv) / f64::from(l))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `epsilon` after `steps` identical steps at `(q, sigma)`.
pub fn epsilon_after(q: f64, sigma: f64, steps: u64, delta: f64) -> Result<f64> {
    let mut ledger = LogMomentLedger::new();
    ledger.accumulate(NoiseEvent::new(sigma, q, steps))?;
    Ok(ledger.epsilon_for_delta(delta))
}

pub const CALIBRATION_BRACKET: (f64, f64) = (0.1, 100.0);
pub const CALIBRATION_RESOLUTION: f64 = 1e-4;

/// Smallest noise multiplier (to within [`CALIBRATION_RESOLUTION`]) whose
/// `steps`-fold composition at ratio `q` stays within `budget`.
pub fn sigma_for_budget(q: f64, steps: u64, budget: PrivacyBudget) -> Result<f64> {
    if steps == 0 {
        return Err(Error::Calibration("steps must be positive".into()));
    }
    let feasible = |sigma: f64| -> Result<bool> {
        Ok(epsilon_after(q, sigma, steps, budget.delta0)? <= budget.epsilon0)
    };
    let (mut lo, mut hi) = CALIBRATION_BRACKET;
    if !feasible(hi)? {
        return Err(Error::Calibration(format!(
            "no sigma in [{lo}, {hi}] meets ({}, {:e}) for q={q}, t={steps}",
            budget.epsilon0, budget.delta0
        )));
    }
    if feasible(lo)? {
        return Ok(lo);
    }
    while hi - lo > CALIBRATION_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
