use rand::Rng;

use crate::data::sample_indices;
use crate::error::{Error, Result};
use crate::nn::{backward_into, forward_cached, Activation, AdamHyper, AdamState, Network, Tensor};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

/// Network with a softmax read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbClassifier {
    pub network: Network,
    pub num_classes: usize,
}

/// Settings for [`ProbClassifier::fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub hidden: Vec<usize>,
    pub iters: usize,
    pub m: usize,
    pub adam: AdamHyper,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            hidden: vec![32, 32],
            iters: 500,
            m: 64,
            adam: AdamHyper {
                lr: 1e-3,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
        }
    }
}

impl ProbClassifier {
    pub fn new(network: Network) -> Result<Self> {
        let num_classes = network.output_size();
        if num_classes < 2 {
            return Err(Error::Contract(
                "classifier needs at least two classes".into(),
            ));
        }
        Ok(ProbClassifier {
            network,
            num_classes,
        })
    }

    pub fn build<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(Network::mlp(
            input,
            hidden,
            classes,
            Activation::LeakyRelu,
            Activation::Identity,
            rng,
        ))
    }

    pub fn probs_one(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.network.forward_one(x))
    }

    /// Probability table, one row per input row.
    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        let logits = self.network.forward(x)?;
        let mut values = Vec::with_capacity(logits.values().len());
        for row in logits.iter_rows() {
            values.extend(softmax(row));
        }
        Tensor::matrix(x.rows(), self.num_classes, values)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(self.probabilities(x)?.iter_rows().map(argmax).collect())
    }

    pub fn accuracy(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        if labels.len() != x.rows() || labels.is_empty() {
            return Err(Error::Dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                x.rows()
            )));
        }
        let pred = self.predict(x)?;
        Ok(pred.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64)
    }

    /// Mean cross-entropy against target distributions and its parameter
    /// gradient.
    pub fn loss_gradient(&self, x: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        if x.len() != targets.len() || x.is_empty() {
            return Err(Error::Dimension(format!(
                "{} inputs for {} targets",
                x.len(),
                targets.len()
            )));
        }
        let m = x.len() as f64;
        let mut grad = vec![0.0; self.network.param_count()];
        let mut loss = 0.0;
        for (xi, t) in x.iter().zip(targets) {
            let cache = forward_cached(&self.network, xi);
            let p = softmax(cache.output());
            loss -= t
                .iter()
                .zip(&p)
                .map(|(&ti, &pi)| ti * pi.max(1e-300).ln())
                .sum::<f64>()
                / m;
            let out_grad: Vec<f64> = p.iter().zip(t).map(|(pi, ti)| (pi - ti) / m).collect();
            backward_into(&self.network, &cache, &out_grad, &mut grad);
        }
        if !loss.is_finite() {
            return Err(Error::Divergence {
                index: 0,
                what: format!("classifier loss {loss}"),
            });
        }
        Ok((loss, grad))
    }

    /// One Adam step on a batch; returns the loss before the step.
    pub fn train_step(
        &mut self,
        x: &[Vec<f64>],
        targets: &[Vec<f64>],
        adam: &mut AdamState,
    ) -> Result<f64> {
        let (loss, grad) = self.loss_gradient(x, targets)?;
        let mut p = self.network.params();
        adam.step(&mut p, &grad)?;
        self.network.set_params(&p)?;
        Ok(loss)
    }

    /// Minibatch training on hard labels.
    pub fn fit<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor,
        labels: &[usize],
        cfg: &FitConfig,
        rng: &mut R,
    ) -> Result<()> {
        let mut adam = AdamState::new(self.network.param_count(), cfg.adam);
        let m = cfg.m.min(x.rows());
        for _ in 0..cfg.iters {
            let idx = sample_indices(x.rows(), m, rng)?;
            let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x.row(i).to_vec()).collect();
            let ts: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| one_hot(labels[i], self.num_classes))
                .collect();
            self.train_step(&xs, &ts, &mut adam)?;
        }
        Ok(())
    }
}

pub fn one_hot(y: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[y] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_toy, ToySpec};
    use crate::seeded_rng;

    #[test]
    fn softmax_rows_are_distributions() {
        let p = softmax(&[1000.0, 0.0, -1000.0]);
        assert_eq!(p[0], 1.0);
        let p = softmax(&[0.1, 0.2, 0.3]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(argmax(&p), 2);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let clf = ProbClassifier::build(2, &[4], 3, &mut seeded_rng(1)).unwrap();
        let x = vec![vec![0.3, -0.2], vec![-0.5, 0.9]];
        let t = vec![one_hot(2, 3), vec![0.2, 0.5, 0.3]];
        let (_, g) = clf.loss_gradient(&x, &t).unwrap();
        let p0 = clf.network.params();
        let h = 1e-6;
        for i in 0..p0.len() {
            let eval = |d: f64| {
                let mut c = clf.clone();
                let mut p = p0.clone();
                p[i] += d;
                c.network.set_params(&p).unwrap();
                c.loss_gradient(&x, &t).unwrap().0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-5 * fd.abs().max(1e-4),
                "{i}: {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn learns_ring_modes() {
        let ds = make_toy(&ToySpec {
            n: 2000,
            ..ToySpec::default()
        })
        .unwrap();
        let mut rng = seeded_rng(3);
        let mut clf = ProbClassifier::build(2, &[32, 32], 8, &mut rng).unwrap();
        clf.fit(
            ds.points(),
            ds.labels().unwrap(),
            &FitConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert!(clf.accuracy(ds.points(), ds.labels().unwrap()).unwrap() >= 0.95);
    }
}
