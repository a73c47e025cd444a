//! Desk-scale datasets and batch sampling.

pub mod csv;
pub mod digits;
pub mod split;
pub mod toy;

use rand::Rng;

pub use self::csv::{parse_csv, read_csv, write_csv, CsvLayout};
pub use split::{split_public_private, SplitSpec};
pub use toy::{make_toy, mode_centers, Family, ToySpec};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Points in `[-1, 1]^d`, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Tensor,
    labels: Option<Vec<usize>>,
    num_classes: usize,
}

const RANGE_SLACK: f64 = 1e-12;

impl Dataset {
    pub fn new(points: Tensor, labels: Option<Vec<usize>>, num_classes: usize) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::Contract("dataset needs at least one point".into()));
        }
        if let Some(i) = points
            .values()
            .iter()
            .position(|v| !v.is_finite() || v.abs() > 1.0 + RANGE_SLACK)
        {
            return Err(Error::Contract(format!(
                "value {} at flat index {i} outside [-1, 1]",
                points.values()[i]
            )));
        }
        if let Some(l) = &labels {
            if l.len() != points.rows() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.rows()
                )));
            }
            if let Some(bad) = l.iter().find(|&&y| y >= num_classes) {
                return Err(Error::Contract(format!(
                    "label {bad} outside [0, {num_classes})"
                )));
            }
        }
        Ok(Dataset {
            points,
            labels,
            num_classes,
        })
    }

    pub fn unlabeled(points: Tensor) -> Result<Self> {
        Self::new(points, None, 0)
    }

    pub fn n(&self) -> usize {
        self.points.rows()
    }

    pub fn d(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Tensor {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            points: self.points.select_rows(idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            num_classes: self.num_classes,
        }
    }

    /// Labelled batch drawn uniformly without replacement.
    pub fn sample_labeled<R: Rng + ?Sized>(
        &self,
        m: usize,
        rng: &mut R,
    ) -> Result<(Tensor, Vec<usize>)> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Contract("dataset has no labels".into()))?;
        let idx = sample_indices(self.n(), m, rng)?;
        let y = idx.iter().map(|&i| labels[i]).collect();
        Ok((self.points.select_rows(&idx), y))
    }
}

/// `m` distinct indices from `0..n`, uniformly.
pub fn sample_indices<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::Contract(format!("batch of {m} from {n} points")));
    }
    Ok(rand::seq::index::sample(rng, n, m).into_vec())
}

/// Read access to training data. Training loops only ever see data through
/// this trait, one sampled batch at a time.
pub trait BatchSource {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn sample_batch(&self, m: usize, rng: &mut dyn rand::RngCore) -> Result<Tensor>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sampling ratio `m / n` charged to the accountant.
    fn sampling_ratio(&self, m: usize) -> f64 {
        m as f64 / self.len() as f64
    }
}

impl BatchSource for Dataset {
    fn len(&self) -> usize {
        self.n()
    }

    fn dim(&self) -> usize {
        self.d()
    }

    fn sample_batch(&self, m: usize, rng: &mut dyn rand::RngCore) -> Result<Tensor> {
        let idx = sample_indices(self.n(), m, rng)?;
        Ok(self.points.select_rows(&idx))
    }
}
