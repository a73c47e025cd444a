use crate::error::{Error, Result};
use crate::nn::{per_example_gradients, Network, Tensor};

/// Lower limit for estimated bounds; dead parameters would otherwise get 0.
pub const BOUND_FLOOR: f64 = 1e-8;

/// Mean over examples of each group's gradient-slice l2 norm, floored at
/// [`BOUND_FLOOR`]. `groups` lists member ids per group.
pub fn mean_group_norms(grads: &[Vec<f64>], groups: &[Vec<usize>]) -> Result<Vec<f64>> {
    if grads.is_empty() {
        return Err(Error::Contract(
            "bound estimation needs at least one example".into(),
        ));
    }
    let m = grads.len() as f64;
    let mut out = Vec::with_capacity(groups.len());
    let mut floored = 0;
    for members in groups {
        let mut total = 0.0;
        for g in grads {
            total += members.iter().map(|&i| g[i] * g[i]).sum::<f64>().sqrt();
        }
        let mean = total / m;
        if mean < BOUND_FLOOR {
            floored += 1;
        }
        out.push(mean.max(BOUND_FLOOR));
    }
    if floored > 0 {
        log::info!(
            "adaptive bounds: {floored} of {} groups floored at {BOUND_FLOOR:e}",
            groups.len()
        );
    }
    Ok(out)
}

/// Per-parameter bounds: the mean absolute gradient of each coordinate.
pub fn per_parameter_bounds(grads: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = grads.first().map_or(0, Vec::len);
    let singletons: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    mean_group_norms(grads, &singletons)
}

/// Estimates group bounds from a public batch and an arbitrary per-example
/// loss on the network output.
pub fn adaptive_bounds<F>(
    net: &Network,
    public_batch: &Tensor,
    loss: F,
    groups: &[Vec<usize>],
) -> Result<Vec<f64>>
where
    F: Fn(usize, &[f64]) -> (f64, Vec<f64>),
{
    if public_batch.rows() == 0 {
        return Err(Error::Contract("public batch is empty".into()));
    }
    let pe = per_example_gradients(net, public_batch, loss)?;
    mean_group_norms(&pe.grads, groups)
}
