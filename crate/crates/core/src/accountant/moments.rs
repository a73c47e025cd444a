//! Log-moments of the privacy loss of the subsampled Gaussian mechanism.
//!
//! With `mu0 = N(0, sigma^2)`, `mu1 = N(1, sigma^2)` and the mixture
//! `mu = (1 - q) mu0 + q mu1`, the order-`lambda` log-moment is
//! `log max(E1, E2)` where
//!
//! ```text
//! E1 = E_{z ~ mu0} [(mu0(z) / mu(z))^lambda]
//! E2 = E_{z ~ mu } [(mu(z) / mu0(z))^lambda]
//! ```
//!
//! Both expectations are integrated numerically in log space: the integrand
//! is shifted by its maximum before exponentiation, so moments far beyond
//! the `f64` range (small sigma, large lambda) stay exact in log terms.

use super::quadrature::{integrate, QuadratureOptions};
use crate::error::{Error, Result};

/// Absolute tolerance of the shifted integrals (peak value 1).
pub const QUAD_TOL: f64 = 1e-12;
pub const MAX_SPLITS: usize = 1_000_000;

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Log-densities needed by the two integrands.
#[derive(Debug, Clone, Copy)]
pub struct MixtureTerms {
    q: f64,
    sigma: f64,
    log_1mq: f64,
    log_q: f64,
    log_norm: f64,
}

impl MixtureTerms {
    pub fn new(q: f64, sigma: f64) -> Self {
        MixtureTerms {
            q,
            sigma,
            log_1mq: (-q).ln_1p(),
            log_q: q.ln(),
            log_norm: -(sigma * (2.0 * std::f64::consts::PI).sqrt()).ln(),
        }
    }

    /// `log mu0(z)`
    #[inline]
    pub fn log_mu0(&self, z: f64) -> f64 {
        self.log_norm - z * z / (2.0 * self.sigma * self.sigma)
    }

    /// `log(mu(z) / mu0(z)) = log((1 - q) + q exp((2z - 1) / (2 sigma^2)))`
    #[inline]
    pub fn log_ratio(&self, z: f64) -> f64 {
        log_add_exp(
            self.log_1mq,
            self.log_q + (2.0 * z - 1.0) / (2.0 * self.sigma * self.sigma),
        )
    }

    /// `log` of the `E1` integrand `mu0 (mu0/mu)^lambda`.
    #[inline]
    pub fn log_e1_integrand(&self, z: f64, lambda: f64) -> f64 {
        self.log_mu0(z) - lambda * self.log_ratio(z)
    }

    /// `log` of the `E2` integrand `mu (mu/mu0)^lambda = mu0 (mu/mu0)^(lambda+1)`.
    #[inline]
    pub fn log_e2_integrand(&self, z: f64, lambda: f64) -> f64 {
        self.log_mu0(z) + (lambda + 1.0) * self.log_ratio(z)
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Integration windows `(E1, E2)`.
///
/// The half-width `B = sigma (sqrt(2 lambda log(1/tol)) + 10)` makes the
/// Gaussian tails beyond it negligible at order `lambda`. The `E2` integrand
/// is a weighted sum of Gaussians centred at `0, 1, ..., lambda + 1`, so its
/// window extends to `lambda + 1 + B` on the right.
pub fn windows(sigma: f64, lambda: u32) -> ((f64, f64), (f64, f64)) {
    let l = f64::from(lambda);
    let b = sigma * ((2.0 * l * (1.0 / QUAD_TOL).ln()).sqrt() + 10.0);
    ((-b, 1.0 + b), (-b, l + 1.0 + b))
}

/// `log integral exp(g)` over `[a, b]` with adaptive quadrature after
/// shifting by the maximum of `g` on a grid of spacing `sigma / 16`.
fn log_integral<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, sigma: f64) -> Result<f64> {
    let step = sigma / 16.0;
    let n = ((b - a) / step).ceil() as usize;
    let mut shift = f64::NEG_INFINITY;
    for i in 0..=n {
        shift = shift.max(g((a + step * i as f64).min(b)));
    }
    if !shift.is_finite() {
        return Err(Error::Accounting(format!("integrand maximum is {shift}")));
    }
    let opts = QuadratureOptions {
        tol: QUAD_TOL,
        max_splits: MAX_SPLITS,
        initial_width: sigma,
    };
    let v = integrate(|z| (g(z) - shift).exp(), a, b, opts)?;
    if !(v > 0.0) {
        return Err(Error::Accounting(format!("integral evaluated to {v}")));
    }
    Ok(shift + v.ln())
}

fn validate(q: f64, sigma: f64, lambda: u32) -> Result<()> {
    if !(0.0..=1.0).contains(&q) || !(sigma > 0.0) || !sigma.is_finite() || lambda < 1 {
        return Err(Error::Accounting(format!(
            "invalid log-moment arguments q={q}, sigma={sigma}, lambda={lambda}"
        )));
    }
    Ok(())
}

/// `log E1` and `log E2` for `0 < q < 1`.
pub fn log_expectations(q: f64, sigma: f64, lambda: u32) -> Result<(f64, f64)> {
    validate(q, sigma, lambda)?;
    let terms = MixtureTerms::new(q, sigma);
    let l = f64::from(lambda);
    let (w1, w2) = windows(sigma, lambda);
    let e1 = log_integral(|z| terms.log_e1_integrand(z, l), w1.0, w1.1, sigma)?;
    let e2 = log_integral(|z| terms.log_e2_integrand(z, l), w2.0, w2.1, sigma)?;
    Ok((e1, e2))
}

/// Order-`lambda` log-moment of one step of the subsampled Gaussian
/// mechanism with sampling ratio `q` and noise multiplier `sigma`.
pub fn subsampled_gaussian_log_moment(q: f64, sigma: f64, lambda: u32) -> Result<f64> {
    validate(q, sigma, lambda)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let l = f64::from(lambda);
    if q == 1.0 {
        return Ok(l * (l + 1.0) / (2.0 * sigma * sigma));
    }
    let (e1, e2) = log_expectations(q, sigma, lambda)?;
    // Both expectations are >= 1 exactly; clamp quadrature noise at the floor.
    Ok(e1.max(e2).max(0.0))
}

/// Log-moments for every order in `grid`.
pub fn log_moments(q: f64, sigma: f64, grid: &[u32]) -> Result<Vec<f64>> {
    grid.iter()
        .map(|&l| subsampled_gaussian_log_moment(q, sigma, l))
        .collect()
}

/// Leading term of the small-`q` upper bound
/// `q^2 lambda (lambda + 1) / ((1 - q) sigma^2)`.
pub fn small_q_bound(q: f64, sigma: f64, lambda: u32) -> f64 {
    let l = f64::from(lambda);
    q * q * l * (l + 1.0) / ((1.0 - q) * sigma * sigma)
}

/// Whether `(q, sigma, lambda)` lies in the regime where [`small_q_bound`]
/// is stated: `sigma >= 1`, `q <= 1/(16 sigma)`, `lambda <= sigma^2 ln(1/(q sigma))`.
pub fn in_bound_regime(q: f64, sigma: f64, lambda: u32) -> bool {
    sigma >= 1.0
        && q > 0.0
        && q <= 1.0 / (16.0 * sigma)
        && f64::from(lambda) <= sigma * sigma * (1.0 / (q * sigma)).ln()
}
