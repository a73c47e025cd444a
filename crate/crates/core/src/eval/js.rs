use rand::seq::SliceRandom;
use rand::Rng;

use super::classifier::{FitConfig, ProbClassifier};
use super::inception::{kl_divergence, partition};
use super::MeanStderr;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// `KL(B_p || B_.5) / 2 + KL(B_.5 || B_p) / 2` for a Bernoulli prediction
/// `p`; zero when the discriminator cannot tell the two sets apart.
pub fn pointwise_js(p: f64) -> f64 {
    let b = [p, 1.0 - p];
    let fair = [0.5, 0.5];
    0.5 * kl_divergence(&b, &fair) + 0.5 * kl_divergence(&fair, &b)
}

/// Mean and standard error of [`pointwise_js`] over equal splits.
pub fn js_from_probabilities(p: &[f64], splits: usize) -> Result<MeanStderr> {
    let per_split: Vec<f64> = partition(p.len(), splits)?
        .into_iter()
        .map(|r| {
            let n = r.len() as f64;
            p[r].iter().map(|&v| pointwise_js(v)).sum::<f64>() / n
        })
        .collect();
    Ok(MeanStderr::of(&per_split))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsConfig {
    pub fit: FitConfig,
    /// Share of each set used to train the discriminator.
    pub train_fraction: f64,
    pub splits: usize,
}

impl Default for JsConfig {
    fn default() -> Self {
        JsConfig {
            fit: FitConfig::default(),
            train_fraction: 0.5,
            splits: 10,
        }
    }
}

/// Trains a fresh real-vs-synthetic discriminator on part of both sets and
/// scores its predictions on the held-out rest. Both sets are truncated to
/// the smaller size so the classes are balanced.
pub fn js_quality_score<R: Rng + ?Sized>(
    real: &Tensor,
    synth: &Tensor,
    cfg: &JsConfig,
    rng: &mut R,
) -> Result<MeanStderr> {
    if real.rows() == 0 || synth.rows() == 0 {
        return Err(Error::Contract("js score needs two non-empty sets".into()));
    }
    if real.cols() != synth.cols() {
        return Err(Error::Dimension(format!(
            "{} vs {} columns",
            real.cols(),
            synth.cols()
        )));
    }
    let n = real.rows().min(synth.rows());
    let n_train = ((n as f64) * cfg.train_fraction).floor() as usize;
    if n_train == 0 || n - n_train < cfg.splits {
        return Err(Error::Contract(format!(
            "{n} points per set is too few for a js score"
        )));
    }
    let mut pick = |t: &Tensor| {
        let mut idx: Vec<usize> = (0..t.rows()).collect();
        idx.shuffle(rng);
        idx.truncate(n);
        t.select_rows(&idx)
    };
    let (real, synth) = (pick(real), pick(synth));
    let train_idx: Vec<usize> = (0..n_train).collect();
    let test_idx: Vec<usize> = (n_train..n).collect();

    let mut rows = real.select_rows(&train_idx).into_values();
    rows.extend(synth.select_rows(&train_idx).into_values());
    let x = Tensor::matrix(2 * n_train, real.cols(), rows)?;
    let labels: Vec<usize> = (0..2 * n_train)
        .map(|i| usize::from(i >= n_train))
        .collect();

    let mut d = ProbClassifier::build(real.cols(), &cfg.fit.hidden, 2, rng)?;
    d.fit(&x, &labels, &cfg.fit, rng)?;

    let mut p = Vec::with_capacity(2 * test_idx.len());
    // Interleave so every split holds both sets equally.
    for &i in &test_idx {
        p.push(d.probs_one(real.row(i))[0]);
        p.push(d.probs_one(synth.row(i))[0]);
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            index: 0,
            what: "js discriminator produced non-finite output".into(),
        });
    }
    js_from_probabilities(&p, cfg.splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_coin_scores_zero() {
        assert_eq!(pointwise_js(0.5), 0.0);
        let s = js_from_probabilities(&[0.5; 40], 10).unwrap();
        assert_eq!((s.mean, s.stderr), (0.0, 0.0));
    }

    #[test]
    fn symmetric_in_label_swap() {
        for p in [0.01, 0.3, 0.77, 0.999] {
            assert!((pointwise_js(p) - pointwise_js(1.0 - p)).abs() < 1e-15);
        }
    }
}
