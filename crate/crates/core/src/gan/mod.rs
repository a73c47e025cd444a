//! WGAN-GP training: non-private baseline, basic and advanced DP loops.

mod metrics;
mod step;
mod train;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use metrics::{parse_metrics, MetricRecord, Phase};
pub use step::{
    generator_gradient, generator_step, wgan_example_gradient, wgan_gradients, WganGradients,
    DIVERGENCE_NORM,
};
pub use train::{
    train_advanced, train_basic, train_nonprivate, warm_start, StopReason, TrainReport,
};

use crate::accountant::{AccountingMode, PrivacyBudget};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamHyper, Network, Tensor};
use crate::sanitizer::Noising;

/// Generator/discriminator pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: Network,
    pub discriminator: Network,
    pub latent_dim: usize,
}

/// Hidden layer widths of both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelShape {
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            latent_dim: 16,
            generator_hidden: vec![64, 64],
            discriminator_hidden: vec![64, 64],
        }
    }
}

impl GanModel {
    pub fn new(generator: Network, discriminator: Network) -> Result<Self> {
        if generator.output_size() != discriminator.input_size() {
            return Err(Error::Dimension(format!(
                "generator emits {} values, discriminator reads {}",
                generator.output_size(),
                discriminator.input_size()
            )));
        }
        if discriminator.output_size() != 1 {
            return Err(Error::Dimension("discriminator must be scalar".into()));
        }
        Ok(GanModel {
            latent_dim: generator.input_size(),
            generator,
            discriminator,
        })
    }

    /// Glorot-initialised MLPs: leaky-ReLU hidden layers, tanh generator
    /// output, identity discriminator output.
    pub fn build<R: Rng + ?Sized>(
        shape: &ModelShape,
        data_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let generator = Network::mlp(
            shape.latent_dim,
            &shape.generator_hidden,
            data_dim,
            Activation::LeakyRelu,
            Activation::Tanh,
            rng,
        );
        let discriminator = Network::mlp(
            data_dim,
            &shape.discriminator_hidden,
            1,
            Activation::LeakyRelu,
            Activation::Identity,
            rng,
        );
        Self::new(generator, discriminator)
    }

    pub fn data_dim(&self) -> usize {
        self.generator.output_size()
    }
}

pub fn sample_latent<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// `n` samples `G(z)`, `z ~ N(0, I)`.
pub fn generate<R: Rng + ?Sized>(model: &GanModel, n: usize, rng: &mut R) -> Result<Tensor> {
    generate_with(&model.generator, n, rng)
}

pub fn generate_with<R: Rng + ?Sized>(
    generator: &Network,
    n: usize,
    rng: &mut R,
) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::Contract("generate needs n >= 1".into()));
    }
    let mut values = Vec::with_capacity(n * generator.output_size());
    for _ in 0..n {
        let z = sample_latent(generator.input_size(), rng);
        values.extend(generator.forward_one(&z));
    }
    Tensor::matrix(n, generator.output_size(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanConfig {
    pub lambda_gp: f64,
    pub n_critic: usize,
    pub m: usize,
    pub m_pub: usize,
    pub adam: AdamHyper,
    pub clip_c: f64,
    pub sigma: f64,
    pub budget: PrivacyBudget,
    /// Number of clipping groups in the advanced loop.
    pub k: usize,
    pub t_warm: usize,
    /// Cap on generator iterations of the main phase.
    pub max_iters: usize,
    pub seed: u64,
    pub noising: Noising,
    pub accounting: AccountingMode,
    /// Estimate bounds on public data (advanced loop).
    pub adaptive: bool,
    /// Critic steps between bound refreshes when `adaptive` is on.
    pub refresh_stride: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            lambda_gp: 10.0,
            n_critic: 4,
            m: 64,
            m_pub: 64,
            adam: AdamHyper::default(),
            clip_c: 1.0,
            sigma: 1.0,
            budget: PrivacyBudget {
                epsilon0: 4.0,
                delta0: 1e-5,
            },
            k: 1,
            t_warm: 0,
            max_iters: 1000,
            seed: 0,
            noising: Noising::PerBatch,
            accounting: AccountingMode::Sound,
            adaptive: false,
            refresh_stride: 1,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(field, msg));
        if !(self.lambda_gp >= 0.0) {
            return bad("gan.lambda_gp", "must be >= 0");
        }
        if self.n_critic == 0 {
            return bad("gan.n_critic", "must be >= 1");
        }
        if self.m == 0 {
            return bad("gan.m", "must be >= 1");
        }
        if self.m_pub == 0 {
            return bad("gan.m_pub", "must be >= 1");
        }
        if self.k == 0 {
            return bad("gan.k", "must be >= 1");
        }
        if self.refresh_stride == 0 {
            return bad("gan.refresh_stride", "must be >= 1");
        }
        if !(self.clip_c > 0.0 && self.clip_c.is_finite()) {
            return bad("gan.clip", "must be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("gan.sigma", "must be >= 0");
        }
        let a = self.adam;
        if !(a.lr > 0.0)
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || !(a.eps > 0.0)
        {
            return bad("gan.adam", "needs lr > 0, betas in [0, 1), eps > 0");
        }
        PrivacyBudget::new(self.budget.epsilon0, self.budget.delta0).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn model() -> GanModel {
        let shape = ModelShape {
            latent_dim: 3,
            generator_hidden: vec![5],
            discriminator_hidden: vec![5],
        };
        GanModel::build(&shape, 2, &mut seeded_rng(1)).unwrap()
    }

    #[test]
    fn generate_shape_range_and_seed() {
        let m = model();
        let a = generate(&m, 100, &mut seeded_rng(4)).unwrap();
        assert_eq!(a.shape(), &[100, 2]);
        assert!(a.values().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(a, generate(&m, 100, &mut seeded_rng(4)).unwrap());
        assert!(generate(&m, 0, &mut seeded_rng(4)).is_err());
    }

    #[test]
    fn mismatched_networks_rejected() {
        let m = model();
        let g = Network::mlp(
            3,
            &[4],
            3,
            Activation::LeakyRelu,
            Activation::Tanh,
            &mut seeded_rng(0),
        );
        assert!(GanModel::new(g, m.discriminator).is_err());
    }

    #[test]
    fn config_invariants() {
        assert!(GanConfig::default().validate().is_ok());
        for c in [
            GanConfig {
                n_critic: 0,
                ..GanConfig::default()
            },
            GanConfig {
                m: 0,
                ..GanConfig::default()
            },
            GanConfig {
                k: 0,
                ..GanConfig::default()
            },
            GanConfig {
                lambda_gp: -1.0,
                ..GanConfig::default()
            },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config { .. })));
        }
    }
}
