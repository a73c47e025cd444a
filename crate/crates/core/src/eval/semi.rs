//! Two-classifier semi-supervised training with generated data.
//!
//! Every iteration first labels fresh samples `x = G(z)` with `C1` and
//! trains `C2` on `(z, x)` against those labels; then `C1` is trained on a
//! batch mixing `floor(m p_s)` generated points labelled by `C2` with real
//! labelled points. `p_s` stays at zero for the first part of training and
//! then grows linearly to its final value.

use super::classifier::{argmax, one_hot, ProbClassifier};
use crate::data::{sample_indices, Dataset};
use crate::error::{Error, Result};
use crate::gan::sample_latent;
use crate::nn::{AdamHyper, AdamState, Network};
use crate::{stream_rng, Rng};

const C1_INIT: u64 = 10;
const REAL_BATCHES: u64 = 11;
const C2_INIT: u64 = 12;
const SYNTHETIC: u64 = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct SemiConfig {
    pub p_s_final: f64,
    pub ramp_start_fraction: f64,
    pub m: usize,
    pub total_iters: usize,
    pub adam: AdamHyper,
    pub hidden: Vec<usize>,
    /// Train `C2` on `C1`'s probabilities instead of its argmax labels.
    pub soft_labels: bool,
    pub seed: u64,
}

impl Default for SemiConfig {
    fn default() -> Self {
        SemiConfig {
            p_s_final: 0.5,
            ramp_start_fraction: 1.0 / 3.0,
            m: 64,
            total_iters: 600,
            adam: AdamHyper {
                lr: 1e-3,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            hidden: vec![32, 32],
            soft_labels: false,
            seed: 0,
        }
    }
}

impl SemiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_s_final) {
            return Err(Error::config("semi.p_s_final", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.ramp_start_fraction) {
            return Err(Error::config(
                "semi.ramp_start_fraction",
                "must lie in [0, 1]",
            ));
        }
        if self.m == 0 || self.total_iters == 0 {
            return Err(Error::config(
                "semi.m",
                "batch size and iterations must be positive",
            ));
        }
        Ok(())
    }

    /// Synthetic share used at iteration `t` (`1..=total_iters`).
    pub fn synthetic_fraction(&self, t: usize) -> f64 {
        let total = self.total_iters as f64;
        let start = self.ramp_start_fraction * total;
        let t = t as f64;
        if t < start || total <= start {
            return if t >= total { self.p_s_final } else { 0.0 };
        }
        (self.p_s_final * (t - start) / (total - start)).min(self.p_s_final)
    }
}

#[derive(Debug, Clone)]
pub struct SemiOutcome {
    pub c1: ProbClassifier,
    pub c2: ProbClassifier,
    /// `C1` training loss per iteration.
    pub c1_losses: Vec<f64>,
    /// `(synthetic, real)` examples seen by `C1` per iteration.
    pub counts: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub supervised: f64,
    pub semi_supervised: f64,
}

fn labels_of(ds: &Dataset) -> Result<&[usize]> {
    match ds.labels() {
        Some(l) if !l.is_empty() && ds.num_classes() >= 2 => Ok(l),
        _ => Err(Error::Contract(
            "semi-supervised training needs labelled data".into(),
        )),
    }
}

struct RealBatches<'a> {
    ds: &'a Dataset,
    labels: &'a [usize],
    rng: Rng,
}

impl RealBatches<'_> {
    fn next(&mut self, count: usize, xs: &mut Vec<Vec<f64>>, ts: &mut Vec<Vec<f64>>) -> Result<()> {
        for i in sample_indices(self.ds.n(), count, &mut self.rng)? {
            xs.push(self.ds.points().row(i).to_vec());
            ts.push(one_hot(self.labels[i], self.ds.num_classes()));
        }
        Ok(())
    }
}

fn new_c1(ds: &Dataset, cfg: &SemiConfig) -> Result<ProbClassifier> {
    ProbClassifier::build(
        ds.d(),
        &cfg.hidden,
        ds.num_classes(),
        &mut stream_rng(cfg.seed, C1_INIT),
    )
}

/// `C1` trained on real labelled batches only, with the same random streams
/// as [`train_semi_supervised`].
pub fn train_supervised(labeled: &Dataset, cfg: &SemiConfig) -> Result<(ProbClassifier, Vec<f64>)> {
    cfg.validate()?;
    let labels = labels_of(labeled)?;
    let m = cfg.m.min(labeled.n());
    let mut c1 = new_c1(labeled, cfg)?;
    let mut adam = AdamState::new(c1.network.param_count(), cfg.adam);
    let mut real = RealBatches {
        ds: labeled,
        labels,
        rng: stream_rng(cfg.seed, REAL_BATCHES),
    };
    let mut losses = Vec::with_capacity(cfg.total_iters);
    for _ in 0..cfg.total_iters {
        let (mut xs, mut ts) = (Vec::new(), Vec::new());
        real.next(m, &mut xs, &mut ts)?;
        losses.push(c1.train_step(&xs, &ts, &mut adam)?);
    }
    Ok((c1, losses))
}

pub fn train_semi_supervised(
    g: &Network,
    labeled: &Dataset,
    cfg: &SemiConfig,
) -> Result<SemiOutcome> {
    cfg.validate()?;
    let labels = labels_of(labeled)?;
    if g.output_size() != labeled.d() {
        return Err(Error::Dimension(format!(
            "generator emits {} values, data has {}",
            g.output_size(),
            labeled.d()
        )));
    }
    let k = labeled.num_classes();
    let m = cfg.m.min(labeled.n());
    let latent = g.input_size();
    let mut c1 = new_c1(labeled, cfg)?;
    let mut c2 = ProbClassifier::build(
        latent + labeled.d(),
        &cfg.hidden,
        k,
        &mut stream_rng(cfg.seed, C2_INIT),
    )?;
    let mut adam1 = AdamState::new(c1.network.param_count(), cfg.adam);
    let mut adam2 = AdamState::new(c2.network.param_count(), cfg.adam);
    let mut real = RealBatches {
        ds: labeled,
        labels,
        rng: stream_rng(cfg.seed, REAL_BATCHES),
    };
    let mut synth_rng = stream_rng(cfg.seed, SYNTHETIC);
    let mut draw = |n: usize| -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..n)
            .map(|_| {
                let z = sample_latent(latent, &mut synth_rng);
                let x = g.forward_one(&z);
                (z, x)
            })
            .collect()
    };
    let joint = |z: &[f64], x: &[f64]| -> Vec<f64> { z.iter().chain(x).copied().collect() };

    let mut c1_losses = Vec::with_capacity(cfg.total_iters);
    let mut counts = Vec::with_capacity(cfg.total_iters);
    for t in 1..=cfg.total_iters {
        let pairs = draw(m);
        let inputs: Vec<Vec<f64>> = pairs.iter().map(|(z, x)| joint(z, x)).collect();
        let targets: Vec<Vec<f64>> = pairs
            .iter()
            .map(|(_, x)| {
                let p = c1.probs_one(x);
                if cfg.soft_labels {
                    p
                } else {
                    one_hot(argmax(&p), k)
                }
            })
            .collect();
        c2.train_step(&inputs, &targets, &mut adam2)?;

        let n_syn = (m as f64 * cfg.synthetic_fraction(t)).floor() as usize;
        let (mut xs, mut ts) = (Vec::with_capacity(m), Vec::with_capacity(m));
        for (z, x) in draw(n_syn) {
            ts.push(one_hot(argmax(&c2.probs_one(&joint(&z, &x))), k));
            xs.push(x);
        }
        real.next(m - n_syn, &mut xs, &mut ts)?;
        counts.push((n_syn, m - n_syn));
        c1_losses.push(c1.train_step(&xs, &ts, &mut adam1)?);
    }
    Ok(SemiOutcome {
        c1,
        c2,
        c1_losses,
        counts,
    })
}

/// Held-out accuracy of `C1` trained with and without generated data.
pub fn compare_with_supervised(
    g: &Network,
    labeled: &Dataset,
    held_out: &Dataset,
    cfg: &SemiConfig,
) -> Result<AccuracyReport> {
    let held_labels = labels_of(held_out)?;
    let (sup, _) = train_supervised(labeled, cfg)?;
    let semi = train_semi_supervised(g, labeled, cfg)?;
    Ok(AccuracyReport {
        supervised: sup.accuracy(held_out.points(), held_labels)?,
        semi_supervised: semi.c1.accuracy(held_out.points(), held_labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_schedule() {
        let cfg = SemiConfig {
            p_s_final: 0.6,
            total_iters: 300,
            ..SemiConfig::default()
        };
        assert_eq!(cfg.synthetic_fraction(99), 0.0);
        assert_eq!(cfg.synthetic_fraction(100), 0.0);
        assert!((cfg.synthetic_fraction(200) - 0.3).abs() < 1e-15);
        assert_eq!(cfg.synthetic_fraction(300), 0.6);
        let mut prev = 0.0;
        for t in 1..=300 {
            let p = cfg.synthetic_fraction(t);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn ramp_starting_at_end() {
        let cfg = SemiConfig {
            ramp_start_fraction: 1.0,
            total_iters: 10,
            ..SemiConfig::default()
        };
        assert_eq!(cfg.synthetic_fraction(9), 0.0);
        assert_eq!(cfg.synthetic_fraction(10), cfg.p_s_final);
    }
}
