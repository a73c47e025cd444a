//! Sample-quality metrics and the semi-supervised analysis task.

pub mod classifier;
pub mod coverage;
pub mod inception;
pub mod js;
pub mod semi;

use std::fmt;

pub use classifier::{FitConfig, ProbClassifier};
pub use coverage::{high_quality_fraction, mode_coverage, DEFAULT_THRESHOLD_SD};
pub use inception::{inception_style_score, kl_divergence, score_from_probabilities};
pub use js::{js_from_probabilities, js_quality_score, pointwise_js, JsConfig};
pub use semi::{
    compare_with_supervised, train_semi_supervised, train_supervised, AccuracyReport, SemiConfig,
    SemiOutcome,
};

/// Mean and standard error over splits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    /// Sample mean and `sd / sqrt(n)` with the `n - 1` variance estimate;
    /// the error is zero for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        MeanStderr { mean, stderr }
    }
}

impl fmt::Display for MeanStderr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} +- {:.4}", self.mean, self.stderr)
    }
}

/// Scores of one set of samples; absent entries were not computed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreReport {
    pub inception_score: Option<MeanStderr>,
    pub js_score: Option<MeanStderr>,
    pub mode_coverage: Option<f64>,
    pub high_quality_fraction: Option<f64>,
}

impl ScoreReport {
    /// Single-line `scores key=value ...` record.
    pub fn to_record(&self) -> String {
        let mut out = String::from("scores");
        if let Some(s) = self.inception_score {
            out += &format!(
                " inception_mean={:?} inception_stderr={:?}",
                s.mean, s.stderr
            );
        }
        if let Some(s) = self.js_score {
            out += &format!(" js_mean={:?} js_stderr={:?}", s.mean, s.stderr);
        }
        if let Some(c) = self.mode_coverage {
            out += &format!(" mode_coverage={c:?}");
        }
        if let Some(h) = self.high_quality_fraction {
            out += &format!(" high_quality_fraction={h:?}");
        }
        out
    }
}
