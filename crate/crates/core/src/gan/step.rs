use rand::Rng;

use super::{sample_latent, GanModel};
use crate::error::{Error, Result};
use crate::nn::grad::penalty_param_gradient_into;
use crate::nn::{
    backward_into, forward_cached, input_gradient, l2_norm, AdamState, Network, Tensor,
};

/// Gradient norms above this are treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Per-example critic gradients of one batch.
#[derive(Debug, Clone)]
pub struct WganGradients {
    pub grads: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
}

impl WganGradients {
    pub fn mean_loss(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.losses.len() as f64
    }

    pub fn mean_grad(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.grads[0].len()];
        for g in &self.grads {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
        let m = self.grads.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    }
}

/// Loss `D(fake) - D(real) + lambda (|grad D(x_hat)| - 1)^2` with
/// `x_hat = rho real + (1 - rho) fake`, and its gradient in the parameters
/// of `d`.
pub fn wgan_example_gradient(
    d: &Network,
    real: &[f64],
    fake: &[f64],
    rho: f64,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; d.param_count()];
    let fake_cache = forward_cached(d, fake);
    backward_into(d, &fake_cache, &[1.0], &mut grad);
    let real_cache = forward_cached(d, real);
    backward_into(d, &real_cache, &[-1.0], &mut grad);
    let x_hat: Vec<f64> = real
        .iter()
        .zip(fake)
        .map(|(&r, &f)| rho * r + (1.0 - rho) * f)
        .collect();
    let (penalty, _, _) = penalty_param_gradient_into(d, &x_hat, lambda, 1.0, &mut grad)?;
    let loss = fake_cache.output()[0] - real_cache.output()[0] + penalty;
    Ok((loss, grad))
}

fn check_finite(index: usize, loss: f64, grad: &[f64]) -> Result<()> {
    let norm = l2_norm(grad);
    if !loss.is_finite() || !norm.is_finite() || norm > DIVERGENCE_NORM {
        return Err(Error::Divergence {
            index,
            what: format!("loss {loss}, gradient norm {norm}"),
        });
    }
    Ok(())
}

/// Per-example critic gradients. For each row, draws `z ~ N(0, I)` and then
/// `rho ~ U[0, 1]`.
pub fn wgan_gradients<R: Rng + ?Sized>(
    model: &GanModel,
    real_batch: &Tensor,
    lambda: f64,
    rng: &mut R,
) -> Result<WganGradients> {
    if real_batch.rows() == 0 {
        return Err(Error::Contract("empty batch".into()));
    }
    if real_batch.cols() != model.data_dim() {
        return Err(Error::Dimension(format!(
            "batch width {} but data dimension {}",
            real_batch.cols(),
            model.data_dim()
        )));
    }
    let mut grads = Vec::with_capacity(real_batch.rows());
    let mut losses = Vec::with_capacity(real_batch.rows());
    for (i, x) in real_batch.iter_rows().enumerate() {
        let z = sample_latent(model.latent_dim, rng);
        let rho: f64 = rng.random();
        let fake = model.generator.forward_one(&z);
        let (loss, grad) = wgan_example_gradient(&model.discriminator, x, &fake, rho, lambda)
            .map_err(|e| match e {
                Error::Divergence { what, .. } => Error::Divergence { index: i, what },
                other => other,
            })?;
        check_finite(i, loss, &grad)?;
        grads.push(grad);
        losses.push(loss);
    }
    Ok(WganGradients { grads, losses })
}

/// Mean of `-D(G(z))` over the given codes and its gradient in the
/// generator parameters.
pub fn generator_gradient(model: &GanModel, codes: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let g = &model.generator;
    let m = codes.len() as f64;
    let mut grad = vec![0.0; g.param_count()];
    let mut loss = 0.0;
    for z in codes {
        let cache = forward_cached(g, z);
        let x = cache.output();
        loss -= model.discriminator.forward_one(x)[0] / m;
        let dx = input_gradient(&model.discriminator, x)?;
        let out_grad: Vec<f64> = dx.iter().map(|v| -v / m).collect();
        backward_into(g, &cache, &out_grad, &mut grad);
    }
    Ok((loss, grad))
}

/// One Adam step of the generator on `m` fresh codes; returns the loss
/// before the update.
pub fn generator_step<R: Rng + ?Sized>(
    model: &mut GanModel,
    m: usize,
    rng: &mut R,
    adam: &mut AdamState,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::Contract("generator batch is empty".into()));
    }
    let codes: Vec<Vec<f64>> = (0..m)
        .map(|_| sample_latent(model.latent_dim, rng))
        .collect();
    let (loss, grad) = generator_gradient(model, &codes)?;
    check_finite(0, loss, &grad)?;
    let mut params = model.generator.params();
    adam.step(&mut params, &grad)?;
    model.generator.set_params(&params)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::ModelShape;
    use crate::nn::{Activation, AdamHyper, DenseLayer};
    use crate::seeded_rng;

    fn linear_critic(w: Vec<f64>) -> Network {
        let n = w.len();
        Network::from_layers(vec![DenseLayer::new(
            n,
            1,
            w,
            vec![0.5],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    fn small_model(seed: u64) -> GanModel {
        let shape = ModelShape {
            latent_dim: 3,
            generator_hidden: vec![6],
            discriminator_hidden: vec![7],
        };
        GanModel::build(&shape, 2, &mut seeded_rng(seed)).unwrap()
    }

    #[test]
    fn linear_critic_without_penalty() {
        let d = linear_critic(vec![0.3, -0.2]);
        let (loss, g) = wgan_example_gradient(&d, &[0.1, 0.4], &[-0.5, 0.2], 0.3, 0.0).unwrap();
        // d/dw = fake - real, d/db = 0
        assert!((g[0] - (-0.6)).abs() < 1e-15 && (g[1] - (-0.2)).abs() < 1e-15);
        assert_eq!(g[2], 0.0);
        assert!((loss - (0.3 * -0.6 + -0.2 * -0.2)).abs() < 1e-15);
    }

    #[test]
    fn batch_shapes() {
        let model = small_model(2);
        let batch = Tensor::matrix(5, 2, vec![0.1; 10]).unwrap();
        let out = wgan_gradients(&model, &batch, 10.0, &mut seeded_rng(0)).unwrap();
        assert_eq!(out.grads.len(), 5);
        assert!(out
            .grads
            .iter()
            .all(|g| g.len() == model.discriminator.param_count()));
    }

    #[test]
    fn example_gradient_matches_finite_differences() {
        let model = small_model(3);
        let d = &model.discriminator;
        let (real, fake, rho, lambda) = ([0.2, -0.7], [0.5, 0.1], 0.37, 10.0);
        let (_, g) = wgan_example_gradient(d, &real, &fake, rho, lambda).unwrap();
        let p0 = d.params();
        let h = 1e-5;
        for i in 0..p0.len() {
            let eval = |delta: f64| {
                let mut p = p0.clone();
                p[i] += delta;
                let mut dd = d.clone();
                dd.set_params(&p).unwrap();
                wgan_example_gradient(&dd, &real, &fake, rho, lambda)
                    .unwrap()
                    .0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-4 * fd.abs().max(1e-3),
                "param {i}: {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn generator_gradient_matches_finite_differences() {
        let model = small_model(8);
        let mut rng = seeded_rng(3);
        let codes: Vec<Vec<f64>> = (0..4).map(|_| sample_latent(3, &mut rng)).collect();
        let (_, g) = generator_gradient(&model, &codes).unwrap();
        let p0 = model.generator.params();
        let h = 1e-6;
        for i in 0..p0.len() {
            let eval = |delta: f64| {
                let mut m = model.clone();
                let mut p = p0.clone();
                p[i] += delta;
                m.generator.set_params(&p).unwrap();
                generator_gradient(&m, &codes).unwrap().0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-5 * fd.abs().max(1e-3),
                "param {i}: {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn constant_critic_leaves_generator_unchanged() {
        let mut model = small_model(4);
        model.discriminator = Network::from_layers(vec![DenseLayer::new(
            2,
            1,
            vec![0.0, 0.0],
            vec![1.5],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let before = model.generator.clone();
        let mut adam = AdamState::new(before.param_count(), AdamHyper::default());
        let loss = generator_step(&mut model, 8, &mut seeded_rng(1), &mut adam).unwrap();
        assert_eq!(loss, -1.5);
        assert_eq!(model.generator, before);
    }

    #[test]
    fn generator_step_is_deterministic() {
        let run = || {
            let mut model = small_model(5);
            let mut adam = AdamState::new(model.generator.param_count(), AdamHyper::default());
            generator_step(&mut model, 8, &mut seeded_rng(2), &mut adam).unwrap();
            model
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn exploding_gradients_are_divergence() {
        let d = linear_critic(vec![1e7, 0.0]);
        let mut model = small_model(6);
        model.discriminator = d;
        let batch = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            wgan_gradients(&model, &batch, 1.0, &mut seeded_rng(0)),
            Err(Error::Divergence { .. })
        ));
    }
}
