//! Browser bindings: a privacy-budget curve, the weight-clustering trace and
//! a small ring GAN that can be stepped from JavaScript.

use dpgan::accountant::{LogMomentLedger, NoiseEvent, PrivacyBudget};
use dpgan::data::{make_toy, mode_centers, Dataset, ToySpec};
use dpgan::eval::{mode_coverage, DEFAULT_THRESHOLD_SD};
use dpgan::gan::{generate, train_basic, train_nonprivate, GanConfig, GanModel, ModelShape};
use dpgan::nn::AdamHyper;
use dpgan::sanitizer::cluster_weights;
use dpgan::{seeded_rng, stream_rng, Error};
use wasm_bindgen::prelude::*;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Epsilon spent after each of `points` evenly spaced step counts up to
/// `steps`, at fixed `delta`.
pub fn epsilon_curve(
    q: f64,
    sigma: f64,
    steps: u64,
    delta: f64,
    points: usize,
) -> Result<Vec<f64>, Error> {
    let points = points.max(1) as u64;
    let mut ledger = LogMomentLedger::new();
    let mut done = 0;
    let mut out = Vec::with_capacity(points as usize);
    for i in 1..=points {
        let target = steps * i / points;
        if target > done {
            ledger.accumulate(NoiseEvent::new(sigma, q, target - done))?;
            done = target;
        }
        out.push(ledger.epsilon_for_delta(delta));
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn privacy_curve(
    q: f64,
    sigma: f64,
    steps: u32,
    delta: f64,
    points: u32,
) -> Result<Vec<f64>, JsError> {
    epsilon_curve(q, sigma, u64::from(steps), delta, points as usize).map_err(js)
}

/// One line per group: `bound mean_bound : member ids`.
pub fn cluster_text(bounds: &[f64], k: usize) -> Result<String, Error> {
    let c = cluster_weights(bounds, k)?;
    let mut s = String::new();
    for (g, mean) in c.plan.groups().iter().zip(&c.mean_bounds) {
        let ids: Vec<String> = g.member_ids.iter().map(usize::to_string).collect();
        s += &format!("{:.4} {:.4} : {}\n", g.bound, mean, ids.join(" "));
    }
    Ok(s)
}

#[wasm_bindgen]
pub fn cluster_bounds(bounds: Vec<f64>, k: usize) -> Result<String, JsError> {
    cluster_text(&bounds, k).map_err(js)
}

/// A ring GAN trained in short chunks. Each chunk starts fresh optimizer
/// state; the privacy ledger persists across chunks.
#[wasm_bindgen]
pub struct GanDemo {
    data: Dataset,
    spec: ToySpec,
    model: GanModel,
    cfg: GanConfig,
    private: bool,
    ledger: LogMomentLedger,
    chunks: u64,
    iterations: usize,
    exhausted: bool,
}

impl GanDemo {
    pub fn create(seed: u64, private: bool, sigma: f64, epsilon: f64) -> Result<GanDemo, Error> {
        let spec = ToySpec {
            n: 2000,
            seed,
            ..ToySpec::default()
        };
        let data = make_toy(&spec)?;
        let shape = ModelShape {
            latent_dim: 8,
            generator_hidden: vec![32, 32],
            discriminator_hidden: vec![32, 32],
        };
        let model = GanModel::build(&shape, 2, &mut seeded_rng(seed))?;
        let cfg = GanConfig {
            lambda_gp: 1.0,
            adam: AdamHyper {
                lr: 1e-3,
                beta1: 0.5,
                beta2: 0.9,
                eps: 1e-8,
            },
            sigma,
            budget: PrivacyBudget::new(epsilon, 1e-5)?,
            seed,
            ..GanConfig::default()
        };
        cfg.validate()?;
        Ok(GanDemo {
            data,
            spec,
            model,
            cfg,
            private,
            ledger: LogMomentLedger::new(),
            chunks: 0,
            iterations: 0,
            exhausted: false,
        })
    }

    /// Runs up to `iters` more generator iterations; returns how many ran.
    pub fn advance(&mut self, iters: usize) -> Result<usize, Error> {
        if self.exhausted || iters == 0 {
            return Ok(0);
        }
        let cfg = GanConfig {
            max_iters: iters,
            seed: self
                .cfg
                .seed
                .wrapping_mul(1_000_003)
                .wrapping_add(self.chunks),
            ..self.cfg
        };
        self.chunks += 1;
        let report = if self.private {
            match train_basic(&mut self.model, &self.data, &cfg, &mut self.ledger) {
                Err(Error::BudgetExhausted { .. }) => {
                    self.exhausted = true;
                    return Ok(0);
                }
                r => r?,
            }
        } else {
            train_nonprivate(&mut self.model, &self.data, &cfg)?
        };
        if report.stop_reason != dpgan::gan::StopReason::MaxIters {
            self.exhausted = true;
        }
        self.iterations += report.iterations_run;
        Ok(report.iterations_run)
    }

    pub fn sample_points(&self, n: usize) -> Result<Vec<f64>, Error> {
        Ok(generate(&self.model, n, &mut stream_rng(self.cfg.seed, 30))?.into_values())
    }

    pub fn coverage(&self) -> Result<f64, Error> {
        let s = generate(&self.model, 1000, &mut stream_rng(self.cfg.seed, 30))?;
        Ok(mode_coverage(
            &s,
            &mode_centers(&self.spec),
            self.spec.std,
            DEFAULT_THRESHOLD_SD,
        ))
    }
}

#[wasm_bindgen]
impl GanDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, private: bool, sigma: f64, epsilon: f64) -> Result<GanDemo, JsError> {
        GanDemo::create(u64::from(seed), private, sigma, epsilon).map_err(js)
    }

    pub fn step(&mut self, iters: u32) -> Result<u32, JsError> {
        self.advance(iters as usize).map(|n| n as u32).map_err(js)
    }

    /// Flat `[x0, y0, x1, y1, ...]` generator samples.
    pub fn samples(&self, n: u32) -> Result<Vec<f64>, JsError> {
        self.sample_points(n as usize).map_err(js)
    }

    /// Flat real data points, same layout as [`GanDemo::samples`].
    pub fn real(&self) -> Vec<f64> {
        self.data.points().values().to_vec()
    }

    pub fn mode_coverage(&self) -> Result<f64, JsError> {
        self.coverage().map_err(js)
    }

    pub fn iterations(&self) -> u32 {
        self.iterations as u32
    }

    /// Epsilon spent so far at delta 1e-5; infinite for non-private runs.
    pub fn epsilon(&self) -> f64 {
        if self.private {
            self.ledger.epsilon_for_delta(self.cfg.budget.delta0)
        } else {
            f64::INFINITY
        }
    }

    pub fn finished(&self) -> bool {
        self.exhausted
    }
}
