//! Reverse-mode gradients for [`Network`].
//!
//! Besides plain backpropagation this module differentiates the gradient
//! penalty `lambda * (|grad_x D(x)| - 1)^2` with respect to the parameters.
//! The input gradient is itself produced by a backward sweep, so the penalty
//! gradient is obtained by running reverse mode over that sweep (double
//! backprop). Everything here is written out by hand for dense layers.

use super::network::Network;
use super::tensor::{l2_norm, Tensor};
use crate::error::{Error, Result};

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `h[0]` is the input, `h[l + 1]` the output of layer `l`.
    pub h: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pub a: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.h.last().expect("cache holds at least the input")
    }
}

pub fn forward_cached(net: &Network, x: &[f64]) -> ForwardCache {
    let n = net.layers().len();
    let mut h = Vec::with_capacity(n + 1);
    let mut a = Vec::with_capacity(n);
    h.push(x.to_vec());
    for layer in net.layers() {
        let pre = layer.affine(h.last().unwrap());
        let post = pre.iter().map(|&v| layer.activation.apply(v)).collect();
        a.push(pre);
        h.push(post);
    }
    ForwardCache { h, a }
}

/// Backpropagates `out_grad = dL/d(output)`; adds `dL/dparams` into
/// `param_grad` and returns `dL/dinput`.
pub fn backward_into(
    net: &Network,
    cache: &ForwardCache,
    out_grad: &[f64],
    param_grad: &mut [f64],
) -> Vec<f64> {
    debug_assert_eq!(param_grad.len(), net.param_count());
    let mut upstream = out_grad.to_vec();
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let delta: Vec<f64> = cache.a[l]
            .iter()
            .zip(&upstream)
            .map(|(&a, &g)| layer.activation.derivatives(a).0 * g)
            .collect();
        let off = net.layer_offset(l);
        let (wg, bg) = param_grad[off..off + layer.param_count()].split_at_mut(layer.weight.len());
        let input = &cache.h[l];
        for (row, &d) in wg.chunks_exact_mut(layer.in_size).zip(&delta) {
            for (g, &x) in row.iter_mut().zip(input) {
                *g += d * x;
            }
        }
        for (g, &d) in bg.iter_mut().zip(&delta) {
            *g += d;
        }
        upstream = layer.transpose_mul(&delta);
    }
    upstream
}

/// Per-example parameter gradients and losses.
#[derive(Debug, Clone)]
pub struct PerExample {
    pub grads: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
}

/// Computes `grad_params loss(i, net(x_i))` for every row of `batch`.
///
/// `loss` receives the example index and the network output and returns the
/// loss value together with its gradient with respect to the output.
pub fn per_example_gradients<F>(net: &Network, batch: &Tensor, loss: F) -> Result<PerExample>
where
    F: Fn(usize, &[f64]) -> (f64, Vec<f64>),
{
    if batch.cols() != net.input_size() {
        return Err(Error::Dimension(format!(
            "batch width {} but network input is {}",
            batch.cols(),
            net.input_size()
        )));
    }
    let mut grads = Vec::with_capacity(batch.rows());
    let mut losses = Vec::with_capacity(batch.rows());
    for (i, x) in batch.iter_rows().enumerate() {
        let cache = forward_cached(net, x);
        let (value, out_grad) = loss(i, cache.output());
        if !value.is_finite() || out_grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                index: i,
                what: format!("loss {value}"),
            });
        }
        let mut g = vec![0.0; net.param_count()];
        backward_into(net, &cache, &out_grad, &mut g);
        grads.push(g);
        losses.push(value);
    }
    Ok(PerExample { grads, losses })
}

fn require_scalar(net: &Network) -> Result<()> {
    if net.output_size() != 1 {
        return Err(Error::Contract(format!(
            "input gradient needs a scalar network, output size is {}",
            net.output_size()
        )));
    }
    Ok(())
}

/// `grad_x net(x)` for a scalar-output network.
pub fn input_gradient(net: &Network, x: &[f64]) -> Result<Vec<f64>> {
    require_scalar(net)?;
    let cache = forward_cached(net, x);
    let mut scratch = vec![0.0; net.param_count()];
    Ok(backward_into(net, &cache, &[1.0], &mut scratch))
}

/// Gradient penalty at one point.
#[derive(Debug, Clone)]
pub struct Penalty {
    /// `lambda * (|grad_x D| - 1)^2`
    pub value: f64,
    pub input_grad_norm: f64,
    /// Gradient of `value` with respect to the parameters.
    pub grad: Vec<f64>,
    /// The input gradient vanished; the norm is not differentiable there and
    /// `grad` was set to zero.
    pub degenerate: bool,
}

/// Value and parameter gradient of `lambda * (|grad_x D(x)|_2 - 1)^2`.
pub fn penalty_param_gradient(net: &Network, x: &[f64], lambda: f64) -> Result<Penalty> {
    let mut grad = vec![0.0; net.param_count()];
    let (value, norm, degenerate) = penalty_param_gradient_into(net, x, lambda, 1.0, &mut grad)?;
    Ok(Penalty {
        value,
        input_grad_norm: norm,
        grad,
        degenerate,
    })
}

/// Adds `scale * grad_params penalty` into `acc`; returns
/// `(penalty, input-gradient norm, degenerate)`.
pub(crate) fn penalty_param_gradient_into(
    net: &Network,
    x: &[f64],
    lambda: f64,
    scale: f64,
    acc: &mut [f64],
) -> Result<(f64, f64, bool)> {
    require_scalar(net)?;
    let layers = net.layers();
    let n = layers.len();
    let cache = forward_cached(net, x);

    // Backward sweep, keeping every intermediate: g[l] = dD/dh[l], delta[l] = dD/da[l].
    let mut g: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut delta: Vec<Vec<f64>> = vec![Vec::new(); n];
    g[n] = vec![1.0];
    for l in (0..n).rev() {
        let act = layers[l].activation;
        delta[l] = cache.a[l]
            .iter()
            .zip(&g[l + 1])
            .map(|(&a, &up)| act.derivatives(a).0 * up)
            .collect();
        g[l] = layers[l].transpose_mul(&delta[l]);
    }
    let v = &g[0];
    let norm = l2_norm(v);
    let value = lambda * (norm - 1.0).powi(2);
    if !value.is_finite() {
        return Err(Error::Divergence {
            index: 0,
            what: format!("gradient penalty {value}"),
        });
    }
    if norm == 0.0 {
        log::warn!("gradient penalty: input gradient is exactly zero, penalty gradient set to 0");
        return Ok((value, norm, true));
    }
    if lambda == 0.0 {
        return Ok((value, norm, false));
    }

    // Reverse mode over the backward sweep. Adjoints of g flow from the input
    // side towards the output; contributions to a[l] go through the
    // activation's second derivative.
    let coeff = scale * 2.0 * lambda * (norm - 1.0) / norm;
    let mut g_bar: Vec<f64> = v.iter().map(|vi| coeff * vi).collect();
    let mut a_bar: Vec<Vec<f64>> = Vec::with_capacity(n);
    for l in 0..n {
        let layer = &layers[l];
        let off = net.layer_offset(l);
        // g[l] = W^T delta[l]
        let delta_bar = layer.affine_no_bias(&g_bar);
        let wg = &mut acc[off..off + layer.weight.len()];
        for (row, &d) in wg.chunks_exact_mut(layer.in_size).zip(&delta[l]) {
            for (w, &gb) in row.iter_mut().zip(&g_bar) {
                *w += d * gb;
            }
        }
        // delta[l] = act'(a[l]) * g[l + 1]
        let mut next = Vec::with_capacity(layer.out_size);
        let mut ab = Vec::with_capacity(layer.out_size);
        for ((&a, &up), &db) in cache.a[l].iter().zip(&g[l + 1]).zip(&delta_bar) {
            let (d1, d2) = layer.activation.derivatives(a);
            next.push(d1 * db);
            ab.push(d2 * up * db);
        }
        a_bar.push(ab);
        g_bar = next;
    }

    // Reverse mode over the forward pass; D itself does not enter the penalty.
    let mut h_bar = vec![0.0; net.output_size()];
    for l in (0..n).rev() {
        let layer = &layers[l];
        let ab: Vec<f64> = a_bar[l]
            .iter()
            .zip(&cache.a[l])
            .zip(&h_bar)
            .map(|((&part, &a), &hb)| part + layer.activation.derivatives(a).0 * hb)
            .collect();
        let off = net.layer_offset(l);
        let (wg, bg) = acc[off..off + layer.param_count()].split_at_mut(layer.weight.len());
        for (row, &d) in wg.chunks_exact_mut(layer.in_size).zip(&ab) {
            for (w, &hx) in row.iter_mut().zip(&cache.h[l]) {
                *w += d * hx;
            }
        }
        for (b, &d) in bg.iter_mut().zip(&ab) {
            *b += d;
        }
        h_bar = layer.transpose_mul(&ab);
    }
    Ok((value, norm, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::{Activation, DenseLayer};
    use crate::seeded_rng;
    use rand::Rng;

    fn linear(w: &[f64]) -> Network {
        let l = DenseLayer::new(w.len(), 1, w.to_vec(), vec![0.0], Activation::Identity).unwrap();
        Network::from_layers(vec![l]).unwrap()
    }

    #[test]
    fn linear_model_weight_gradient_is_input() {
        let net = linear(&[0.3, -0.7]);
        let batch = Tensor::matrix(2, 2, vec![1.0, 2.0, -3.0, 0.5]).unwrap();
        let pe = per_example_gradients(&net, &batch, |_, out| (out[0], vec![1.0])).unwrap();
        assert_eq!(pe.grads[0], vec![1.0, 2.0, 1.0]);
        assert_eq!(pe.grads[1], vec![-3.0, 0.5, 1.0]);
    }

    #[test]
    fn identical_examples_give_identical_gradients() {
        let net = Network::mlp(
            2,
            &[5],
            1,
            Activation::Tanh,
            Activation::Identity,
            &mut seeded_rng(4),
        );
        let batch = Tensor::matrix(3, 2, [0.2, -0.4].repeat(3)).unwrap();
        let pe =
            per_example_gradients(&net, &batch, |_, out| (out[0] * out[0], vec![2.0 * out[0]]))
                .unwrap();
        assert_eq!(pe.grads[0], pe.grads[1]);
        assert_eq!(pe.grads[1], pe.grads[2]);
    }

    #[test]
    fn non_finite_loss_reports_example_index() {
        let net = linear(&[1.0]);
        let batch = Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let err = per_example_gradients(&net, &batch, |i, out| {
            (if i == 2 { f64::NAN } else { out[0] }, vec![1.0])
        })
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { index: 2, .. }));
    }

    #[test]
    fn input_gradient_of_linear_model_is_weight() {
        let net = linear(&[3.0, 4.0]);
        assert_eq!(input_gradient(&net, &[0.1, -9.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(input_gradient(&net, &[5.0, 5.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn zero_network_has_zero_input_gradient() {
        let mut net = Network::mlp(
            3,
            &[4],
            1,
            Activation::Tanh,
            Activation::Identity,
            &mut seeded_rng(5),
        );
        let zeros = vec![0.0; net.param_count()];
        net.set_params(&zeros).unwrap();
        assert_eq!(
            input_gradient(&net, &[1.0, 2.0, 3.0]).unwrap(),
            vec![0.0; 3]
        );
    }

    #[test]
    fn input_gradient_requires_scalar_output() {
        let net = Network::mlp(
            2,
            &[],
            2,
            Activation::Tanh,
            Activation::Identity,
            &mut seeded_rng(6),
        );
        assert!(matches!(
            input_gradient(&net, &[0.0, 0.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn penalty_vanishes_at_unit_norm() {
        let net = linear(&[0.6, 0.8]);
        let p = penalty_param_gradient(&net, &[0.3, 0.1], 10.0).unwrap();
        assert!(p.value.abs() < 1e-30);
        assert!(p.grad.iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn penalty_gradient_linear_closed_form() {
        let net = linear(&[3.0, 4.0]);
        let p = penalty_param_gradient(&net, &[0.5, -0.5], 10.0).unwrap();
        assert!((p.value - 160.0).abs() < 1e-12);
        // 2 * lambda * (|w| - 1) * w / |w| = 2 * 10 * 4 * (0.6, 0.8)
        assert!((p.grad[0] - 48.0).abs() < 1e-12);
        assert!((p.grad[1] - 64.0).abs() < 1e-12);
        assert_eq!(p.grad[2], 0.0);
    }

    #[test]
    fn degenerate_penalty_returns_zero_gradient() {
        let mut net = Network::mlp(
            2,
            &[3],
            1,
            Activation::Tanh,
            Activation::Identity,
            &mut seeded_rng(7),
        );
        let zeros = vec![0.0; net.param_count()];
        net.set_params(&zeros).unwrap();
        let p = penalty_param_gradient(&net, &[0.1, 0.2], 10.0).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.value, 10.0);
        assert!(p.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn summed_per_example_equals_batch_gradient() {
        let mut rng = seeded_rng(8);
        let net = Network::mlp(
            3,
            &[6, 4],
            1,
            Activation::LeakyRelu,
            Activation::Identity,
            &mut rng,
        );
        let vals: Vec<f64> = (0..5 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = Tensor::matrix(5, 3, vals).unwrap();
        let pe = per_example_gradients(&net, &batch, |_, o| (o[0], vec![1.0])).unwrap();
        let mut summed = vec![0.0; net.param_count()];
        for g in &pe.grads {
            for (s, v) in summed.iter_mut().zip(g) {
                *s += v;
            }
        }
        let mut joint = vec![0.0; net.param_count()];
        for x in batch.iter_rows() {
            let c = forward_cached(&net, x);
            backward_into(&net, &c, &[1.0], &mut joint);
        }
        for (a, b) in summed.iter().zip(&joint) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}
