use super::MeanStderr;
use crate::error::{Error, Result};
use crate::nn::Tensor;

use super::classifier::ProbClassifier;

/// Floor applied to the reference probability inside KL terms.
pub const PROB_FLOOR: f64 = 1e-12;

/// `KL(p || q)`. Terms with `p = 0` contribute nothing (the `0 ln 0` limit),
/// so flooring never biases exactly one-hot rows.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b.max(PROB_FLOOR)).ln())
        .sum()
}

/// Row ranges of an equal partition of `n` rows into `splits` parts.
pub(crate) fn partition(n: usize, splits: usize) -> Result<Vec<std::ops::Range<usize>>> {
    if splits == 0 || n < splits {
        return Err(Error::Contract(format!(
            "cannot split {n} rows into {splits} parts"
        )));
    }
    Ok((0..splits)
        .map(|i| i * n / splits..(i + 1) * n / splits)
        .collect())
}

/// `exp(mean_x KL(p(y|x) || p(y)))` per split, where `p(y)` is the split's
/// mean row; mean and standard error over splits.
pub fn score_from_probabilities(table: &Tensor, splits: usize) -> Result<MeanStderr> {
    let k = table.cols();
    let mut scores = Vec::with_capacity(splits);
    for range in partition(table.rows(), splits)? {
        let n = range.len() as f64;
        let mut marginal = vec![0.0; k];
        for i in range.clone() {
            for (m, &p) in marginal.iter_mut().zip(table.row(i)) {
                *m += p / n;
            }
        }
        let mean_kl = range
            .map(|i| kl_divergence(table.row(i), &marginal))
            .sum::<f64>()
            / n;
        scores.push(mean_kl.exp());
    }
    Ok(MeanStderr::of(&scores))
}

pub fn inception_style_score(
    samples: &Tensor,
    clf: &ProbClassifier,
    splits: usize,
) -> Result<MeanStderr> {
    if samples.rows() == 0 {
        return Err(Error::Contract("no samples to score".into()));
    }
    score_from_probabilities(&clf.probabilities(samples)?, splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_covers_rows() {
        let p = partition(23, 10).unwrap();
        assert_eq!(p.first().unwrap().start, 0);
        assert_eq!(p.last().unwrap().end, 23);
        assert!(p.windows(2).all(|w| w[0].end == w[1].start));
        assert!(partition(3, 10).is_err());
    }

    #[test]
    fn kl_zero_for_equal_distributions() {
        assert_eq!(kl_divergence(&[0.25, 0.75], &[0.25, 0.75]), 0.0);
    }
}
