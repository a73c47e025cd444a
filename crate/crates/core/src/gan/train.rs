use std::fmt;

use super::metrics::{MetricRecord, Phase};
use super::step::{generator_step, wgan_gradients};
use super::{GanConfig, GanModel};
use crate::accountant::{LogMomentLedger, NoiseEvent};
use crate::data::BatchSource;
use crate::error::{Error, Result};
use crate::nn::{l2_norm, AdamState};
use crate::sanitizer::adaptive::per_parameter_bounds;
use crate::sanitizer::{cluster_weights, sanitize, ClippingPlan};
use crate::{stream_rng, Rng};

/// Random stream used by the training loops; model initialisation is left to
/// the caller.
const TRAIN_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Reserved for external convergence criteria; the built-in loops stop on
    /// `max_iters`, the privacy budget or divergence.
    Converged,
    BudgetExhausted,
    MaxIters,
    Diverged,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::MaxIters => "max_iters",
            StopReason::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Generator iterations of the main phase (warm start excluded).
    pub iterations_run: usize,
    /// `epsilon` at the budget's `delta0`, read from the ledger.
    pub epsilon_consumed: f64,
    /// `delta` at the budget's `epsilon0`, read from the ledger.
    pub delta_at_budget_epsilon: f64,
    pub stop_reason: StopReason,
    pub metrics: Vec<MetricRecord>,
    /// Message of the divergence that stopped training, if any.
    pub divergence: Option<String>,
}

impl TrainReport {
    fn new() -> Self {
        TrainReport {
            iterations_run: 0,
            epsilon_consumed: f64::INFINITY,
            delta_at_budget_epsilon: 1.0,
            stop_reason: StopReason::MaxIters,
            metrics: Vec::new(),
            divergence: None,
        }
    }

    fn diverged(&mut self, e: Error) -> Result<()> {
        match e {
            Error::Divergence { .. } => {
                log::warn!("training diverged: {e}");
                self.stop_reason = StopReason::Diverged;
                self.divergence = Some(e.to_string());
                Ok(())
            }
            other => Err(other),
        }
    }
}

struct Session<'a> {
    model: &'a mut GanModel,
    cfg: &'a GanConfig,
    opt_d: AdamState,
    opt_g: AdamState,
    rng: Rng,
}

impl<'a> Session<'a> {
    fn new(model: &'a mut GanModel, cfg: &'a GanConfig) -> Self {
        Session {
            opt_d: AdamState::new(model.discriminator.param_count(), cfg.adam),
            opt_g: AdamState::new(model.generator.param_count(), cfg.adam),
            rng: stream_rng(cfg.seed, TRAIN_STREAM),
            model,
            cfg,
        }
    }

    fn update_critic(&mut self, grad: &[f64]) -> Result<()> {
        let norm = l2_norm(grad);
        if !norm.is_finite() {
            return Err(Error::Divergence {
                index: 0,
                what: format!("critic update norm {norm}"),
            });
        }
        let mut p = self.model.discriminator.params();
        self.opt_d.step(&mut p, grad)?;
        self.model.discriminator.set_params(&p)
    }

    /// `n_critic` plain WGAN-GP critic steps and one generator step.
    fn plain_iteration(&mut self, data: &dyn BatchSource) -> Result<(f64, f64)> {
        let m = self.cfg.m.min(data.len());
        let mut d_loss = f64::NAN;
        for _ in 0..self.cfg.n_critic {
            let batch = data.sample_batch(m, &mut self.rng)?;
            let wg = wgan_gradients(self.model, &batch, self.cfg.lambda_gp, &mut self.rng)?;
            self.update_critic(&wg.mean_grad())?;
            d_loss = wg.mean_loss();
        }
        let g_loss = generator_step(self.model, self.cfg.m, &mut self.rng, &mut self.opt_g)?;
        Ok((d_loss, g_loss))
    }

    fn warm(
        &mut self,
        public: &dyn BatchSource,
        iters: usize,
        ledger: Option<&LogMomentLedger>,
        report: &mut TrainReport,
    ) -> Result<bool> {
        let budget = self.cfg.budget;
        let (epsilon, delta) = ledger.map_or((f64::INFINITY, 1.0), |l| {
            (
                l.epsilon_for_delta(budget.delta0),
                l.delta_for_epsilon(budget.epsilon0),
            )
        });
        for it in 1..=iters {
            match self.plain_iteration(public) {
                Ok((d_loss, g_loss)) => report.metrics.push(MetricRecord {
                    iter: it,
                    phase: Phase::Warm,
                    d_loss,
                    g_loss,
                    epsilon,
                    delta,
                    bounds: "-".into(),
                }),
                Err(e) => {
                    report.diverged(e)?;
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Where clipping plans come from in the DP loop.
enum PlanSource<'a> {
    Fixed(ClippingPlan),
    Adaptive {
        public: &'a dyn BatchSource,
        k: usize,
        current: Option<ClippingPlan>,
        steps: usize,
    },
}

impl PlanSource<'_> {
    fn plan(&mut self, s: &mut Session) -> Result<ClippingPlan> {
        match self {
            PlanSource::Fixed(p) => Ok(p.clone()),
            PlanSource::Adaptive {
                public,
                k,
                current,
                steps,
            } => {
                if current.is_none() || *steps % s.cfg.refresh_stride == 0 {
                    let m_pub = s.cfg.m_pub.min(public.len());
                    let batch = public.sample_batch(m_pub, &mut s.rng)?;
                    let wg = wgan_gradients(s.model, &batch, s.cfg.lambda_gp, &mut s.rng)?;
                    let bounds = per_parameter_bounds(&wg.grads)?;
                    *current = Some(cluster_weights(&bounds, *k)?.mean_bound_plan()?);
                }
                *steps += 1;
                Ok(current.clone().expect("plan set above"))
            }
        }
    }
}

fn check_budget(cfg: &GanConfig, ledger: &LogMomentLedger) -> Result<()> {
    let delta = ledger.delta_for_epsilon(cfg.budget.epsilon0);
    if delta > cfg.budget.delta0 {
        return Err(Error::BudgetExhausted {
            delta,
            delta0: cfg.budget.delta0,
        });
    }
    Ok(())
}

fn dp_loop(
    s: &mut Session,
    private: &dyn BatchSource,
    plans: &mut PlanSource,
    ledger: &mut LogMomentLedger,
    report: &mut TrainReport,
) -> Result<()> {
    let cfg = *s.cfg;
    let q = private.sampling_ratio(cfg.m);
    let n_param = s.model.discriminator.param_count();
    report.stop_reason = StopReason::MaxIters;
    for it in 1..=cfg.max_iters {
        let step = |s: &mut Session,
                    plans: &mut PlanSource,
                    ledger: &mut LogMomentLedger|
         -> Result<(f64, f64, String)> {
            let mut d_loss = f64::NAN;
            let mut digest = String::new();
            for _ in 0..cfg.n_critic {
                let plan = plans.plan(s)?;
                let batch = private.sample_batch(cfg.m, &mut s.rng)?;
                let wg = wgan_gradients(s.model, &batch, cfg.lambda_gp, &mut s.rng)?;
                let g = sanitize(&wg.grads, &plan, cfg.sigma, &mut s.rng, cfg.noising)?;
                s.update_critic(&g)?;
                ledger.accumulate(
                    NoiseEvent::new(cfg.sigma, q, 1)
                        .grouped(plan.groups().len(), cfg.accounting)
                        .with_n_param(n_param),
                )?;
                d_loss = wg.mean_loss();
                digest = plan.digest();
            }
            let g_loss = generator_step(s.model, cfg.m, &mut s.rng, &mut s.opt_g)?;
            Ok((d_loss, g_loss, digest))
        };
        let (d_loss, g_loss, bounds) = match step(s, plans, ledger) {
            Ok(v) => v,
            Err(e) => return report.diverged(e),
        };
        report.iterations_run = it;
        let delta = ledger.delta_for_epsilon(cfg.budget.epsilon0);
        report.metrics.push(MetricRecord {
            iter: it,
            phase: Phase::Dp,
            d_loss,
            g_loss,
            epsilon: ledger.epsilon_for_delta(cfg.budget.delta0),
            delta,
            bounds,
        });
        if delta > cfg.budget.delta0 {
            report.stop_reason = StopReason::BudgetExhausted;
            break;
        }
    }
    Ok(())
}

fn finish(report: &mut TrainReport, ledger: &LogMomentLedger, cfg: &GanConfig) {
    report.epsilon_consumed = ledger.epsilon_for_delta(cfg.budget.delta0);
    report.delta_at_budget_epsilon = ledger.delta_for_epsilon(cfg.budget.epsilon0);
}

/// Improved-WGAN baseline: no clipping, noise or accounting.
pub fn train_nonprivate(
    model: &mut GanModel,
    data: &dyn BatchSource,
    cfg: &GanConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut report = TrainReport::new();
    let mut s = Session::new(model, cfg);
    for it in 1..=cfg.max_iters {
        match s.plain_iteration(data) {
            Ok((d_loss, g_loss)) => {
                report.iterations_run = it;
                report.metrics.push(MetricRecord {
                    iter: it,
                    phase: Phase::NonPrivate,
                    d_loss,
                    g_loss,
                    epsilon: f64::INFINITY,
                    delta: 1.0,
                    bounds: "-".into(),
                });
            }
            Err(e) => {
                report.diverged(e)?;
                break;
            }
        }
    }
    Ok(report)
}

/// Non-private training on public data only. Touches no privacy ledger.
pub fn warm_start(
    model: &mut GanModel,
    public: &dyn BatchSource,
    iters: usize,
    cfg: &GanConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut report = TrainReport::new();
    let mut s = Session::new(model, cfg);
    if s.warm(public, iters, None, &mut report)? {
        report.iterations_run = iters;
    }
    Ok(report)
}

/// Basic DP training: global clipping at `clip_c`, Gaussian noise, one
/// ledger event per critic step, stop once `delta(epsilon0) > delta0`.
pub fn train_basic(
    model: &mut GanModel,
    private: &dyn BatchSource,
    cfg: &GanConfig,
    ledger: &mut LogMomentLedger,
) -> Result<TrainReport> {
    cfg.validate()?;
    check_budget(cfg, ledger)?;
    let mut plans = PlanSource::Fixed(ClippingPlan::global(
        model.discriminator.param_count(),
        cfg.clip_c,
    )?);
    let mut report = TrainReport::new();
    let mut s = Session::new(model, cfg);
    dp_loop(&mut s, private, &mut plans, ledger, &mut report)?;
    finish(&mut report, ledger, cfg);
    Ok(report)
}

/// Advanced DP training: optional warm start on public data, then DP steps
/// with bounds estimated on public batches and clustered into `k` groups.
///
/// With `adaptive` off the plan is the global bound `clip_c`, which requires
/// `k == 1`.
pub fn train_advanced(
    model: &mut GanModel,
    private: &dyn BatchSource,
    public: Option<&dyn BatchSource>,
    cfg: &GanConfig,
    ledger: &mut LogMomentLedger,
) -> Result<TrainReport> {
    cfg.validate()?;
    let public = public.filter(|p| !p.is_empty());
    if (cfg.t_warm > 0 || cfg.adaptive) && public.is_none() {
        return Err(Error::config(
            "data.public_fraction",
            "warm start and adaptive clipping need public data",
        ));
    }
    if !cfg.adaptive && cfg.k != 1 {
        return Err(Error::config("gan.k", "k > 1 needs adaptive clipping"));
    }
    check_budget(cfg, ledger)?;
    let mut plans = match public {
        Some(public) if cfg.adaptive => PlanSource::Adaptive {
            public,
            k: cfg.k,
            current: None,
            steps: 0,
        },
        _ => PlanSource::Fixed(ClippingPlan::global(
            model.discriminator.param_count(),
            cfg.clip_c,
        )?),
    };
    let mut report = TrainReport::new();
    let mut s = Session::new(model, cfg);
    let warmed = match public {
        Some(public) if cfg.t_warm > 0 => s.warm(public, cfg.t_warm, Some(ledger), &mut report)?,
        _ => true,
    };
    if warmed {
        dp_loop(&mut s, private, &mut plans, ledger, &mut report)?;
    }
    finish(&mut report, ledger, cfg);
    Ok(report)
}
