use crate::nn::Tensor;

pub const DEFAULT_THRESHOLD_SD: f64 = 3.0;

fn near(x: &[f64], c: &[f64], radius: f64) -> bool {
    x.iter()
        .zip(c)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
        <= radius
}

/// Fraction of modes with at least `max(1, 0.2 n / modes)` samples within
/// `threshold_sd * std` of the mode center.
pub fn mode_coverage(samples: &Tensor, centers: &[[f64; 2]], std: f64, threshold_sd: f64) -> f64 {
    if centers.is_empty() {
        return 0.0;
    }
    let radius = threshold_sd * std;
    let need = (0.2 * samples.rows() as f64 / centers.len() as f64).max(1.0);
    let covered = centers
        .iter()
        .filter(|c| {
            samples
                .iter_rows()
                .filter(|x| near(x, &c[..], radius))
                .count() as f64
                >= need
        })
        .count();
    covered as f64 / centers.len() as f64
}

/// Fraction of samples within `threshold_sd * std` of some center.
pub fn high_quality_fraction(
    samples: &Tensor,
    centers: &[[f64; 2]],
    std: f64,
    threshold_sd: f64,
) -> f64 {
    if samples.rows() == 0 {
        return 0.0;
    }
    let radius = threshold_sd * std;
    let good = samples
        .iter_rows()
        .filter(|x| centers.iter().any(|c| near(x, &c[..], radius)))
        .count();
    good as f64 / samples.rows() as f64
}
