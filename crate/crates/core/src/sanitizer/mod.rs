//! Gradient sanitisation: grouped clipping and Gaussian perturbation.

pub mod adaptive;
pub mod cluster;
pub mod plan;

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use adaptive::{adaptive_bounds, mean_group_norms, per_parameter_bounds, BOUND_FLOOR};
pub use cluster::{cluster_weights, Clustering};
pub use plan::{weight_bias_plan, ClippingPlan, ParameterGroup, Strategy};

use crate::error::{Error, Result};
use crate::nn::l2_norm;

/// Where the Gaussian noise enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Noising {
    /// One draw per group on the sum of clipped examples.
    #[default]
    PerBatch,
    /// One draw per group for every example before averaging.
    PerExample,
}

impl std::fmt::Display for Noising {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Noising::PerBatch => "per_batch",
            Noising::PerExample => "per_example",
        })
    }
}

impl FromStr for Noising {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_batch" => Ok(Noising::PerBatch),
            "per_example" => Ok(Noising::PerExample),
            other => Err(Error::config("noising", format!("unknown mode `{other}`"))),
        }
    }
}

/// Scales `g` down to norm `c` if it is longer.
pub fn clip_group(g: &[f64], c: f64) -> Vec<f64> {
    let mut out = g.to_vec();
    clip_in_place(&mut out, c);
    out
}

fn clip_in_place(g: &mut [f64], c: f64) {
    let scale = 1.0f64.max(l2_norm(g) / c);
    if scale > 1.0 {
        g.iter_mut().for_each(|v| *v /= scale);
    }
}

/// Adds `N(0, (sigma c)^2)` to each coordinate.
pub fn perturb<R: Rng + ?Sized>(g: &[f64], c: f64, sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return g.to_vec();
    }
    g.iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + sigma * c * z
        })
        .collect()
}

/// Clips every group slice of one example's gradient to its bound.
pub fn clip_example(g: &[f64], plan: &ClippingPlan) -> Result<Vec<f64>> {
    if g.len() != plan.param_count() {
        return Err(Error::Contract(format!(
            "gradient has {} entries, plan covers {}",
            g.len(),
            plan.param_count()
        )));
    }
    let mut out = g.to_vec();
    for group in plan.groups() {
        let slice: Vec<f64> = group.member_ids.iter().map(|&i| g[i]).collect();
        let clipped = clip_group(&slice, group.bound);
        for (&i, v) in group.member_ids.iter().zip(clipped) {
            out[i] = v;
        }
    }
    Ok(out)
}

/// Per-coordinate noise stddev `sigma * c_j` for the group holding each id.
fn noise_scales(plan: &ClippingPlan, sigma: f64) -> Vec<f64> {
    let mut s = vec![0.0; plan.param_count()];
    for g in plan.groups() {
        for &i in &g.member_ids {
            s[i] = sigma * g.bound;
        }
    }
    s
}

fn add_noise<R: Rng + ?Sized>(acc: &mut [f64], scales: &[f64], rng: &mut R) {
    for (a, &s) in acc.iter_mut().zip(scales) {
        let z: f64 = StandardNormal.sample(rng);
        *a += s * z;
    }
}

/// Clips each example group-wise, adds Gaussian noise and averages.
///
/// Noise is drawn in flat parameter order, so the output does not depend on
/// the order in which the plan lists its groups.
pub fn sanitize<R: Rng + ?Sized>(
    grads: &[Vec<f64>],
    plan: &ClippingPlan,
    sigma: f64,
    rng: &mut R,
    noising: Noising,
) -> Result<Vec<f64>> {
    if grads.is_empty() {
        return Err(Error::Contract("no gradients to sanitize".into()));
    }
    let scales = noise_scales(plan, sigma);
    let mut acc = vec![0.0; plan.param_count()];
    for g in grads {
        let clipped = clip_example(g, plan)?;
        for (a, c) in acc.iter_mut().zip(&clipped) {
            *a += c;
        }
        if noising == Noising::PerExample && sigma > 0.0 {
            add_noise(&mut acc, &scales, rng);
        }
    }
    if noising == Noising::PerBatch && sigma > 0.0 {
        add_noise(&mut acc, &scales, rng);
    }
    let m = grads.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn clip_examples() {
        assert_eq!(clip_group(&[3.0, 4.0], 2.5), vec![1.5, 2.0]);
        assert_eq!(clip_group(&[3.0, 4.0], 10.0), vec![3.0, 4.0]);
        assert_eq!(clip_group(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn perturb_is_identity_without_noise_and_reproducible() {
        let mut rng = seeded_rng(1);
        assert_eq!(perturb(&[1.0, 2.0], 3.0, 0.0, &mut rng), vec![1.0, 2.0]);
        let a = perturb(&[1.0, 2.0], 3.0, 1.0, &mut seeded_rng(9));
        let b = perturb(&[1.0, 2.0], 3.0, 1.0, &mut seeded_rng(9));
        assert_eq!(a, b);
        assert_ne!(a, vec![1.0, 2.0]);
    }

    #[test]
    fn perturb_statistics() {
        let (sigma, c, g) = (1.3, 0.7, 0.25);
        let n = 100_000;
        let mut rng = seeded_rng(2);
        let xs: Vec<f64> = (0..n)
            .map(|_| perturb(&[g], c, sigma, &mut rng)[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = sigma * c;
        assert!((mean - g).abs() <= 4.0 * sd / (n as f64).sqrt());
        assert!((var.sqrt() - sd).abs() <= 0.02 * sd);
    }

    #[test]
    fn noiseless_sanitize_is_plain_average_under_huge_bounds() {
        let plan = ClippingPlan::global(2, 1e9).unwrap();
        let out = sanitize(
            &[vec![1.0, 2.0], vec![3.0, -2.0]],
            &plan,
            0.0,
            &mut seeded_rng(0),
            Noising::PerBatch,
        )
        .unwrap();
        assert_eq!(out, vec![2.0, 0.0]);
    }

    #[test]
    fn single_example_is_clip_plus_noise() {
        let plan = ClippingPlan::global(2, 2.5).unwrap();
        let out = sanitize(
            &[vec![3.0, 4.0]],
            &plan,
            0.8,
            &mut seeded_rng(5),
            Noising::PerBatch,
        )
        .unwrap();
        let expect = perturb(&[1.5, 2.0], 2.5, 0.8, &mut seeded_rng(5));
        assert_eq!(out, expect);
    }

    #[test]
    fn weight_bias_split_differs_from_global_clip() {
        // Global norm of (3, 4, 0.1) is ~5.001; clipping to 1 keeps the
        // direction. Separate groups clip (3, 4) to norm 1 and leave 0.1.
        let g = vec![3.0, 4.0, 0.1];
        let global = ClippingPlan::global(3, 1.0).unwrap();
        let split = ClippingPlan::new(
            vec![
                ParameterGroup {
                    member_ids: vec![0, 1],
                    bound: 1.0,
                },
                ParameterGroup {
                    member_ids: vec![2],
                    bound: 1.0,
                },
            ],
            Strategy::WeightBias,
            3,
        )
        .unwrap();
        let a = clip_example(&g, &global).unwrap();
        let b = clip_example(&g, &split).unwrap();
        let n = (25.0f64 + 0.01).sqrt();
        assert!((a[2] - 0.1 / n).abs() < 1e-15);
        assert_eq!(b, vec![0.6, 0.8, 0.1]);
        assert!(l2_norm(&b) > l2_norm(&a));
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let plan = ClippingPlan::global(3, 1.0).unwrap();
        let r = sanitize(
            &[vec![1.0]],
            &plan,
            0.0,
            &mut seeded_rng(0),
            Noising::PerBatch,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }
}
