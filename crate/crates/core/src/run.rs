//! Experiment runner behind the `dpgan` binary.

use std::path::{Path, PathBuf};

use rand::Rng as _;

use crate::accountant::{epsilon_after, sigma_for_budget, LogMomentLedger, PrivacyBudget};
use crate::config::{DataSource, ExperimentConfig, Mode};
use crate::data::{
    make_toy, mode_centers, read_csv, split_public_private, write_csv, CsvLayout, Dataset, Family,
};
use crate::error::{Error, Result};
use crate::eval::{
    compare_with_supervised, high_quality_fraction, inception_style_score, js_quality_score,
    mode_coverage, FitConfig, JsConfig, ProbClassifier, ScoreReport, DEFAULT_THRESHOLD_SD,
};
use crate::gan::{
    generate_with, train_advanced, train_basic, train_nonprivate, GanModel, StopReason, TrainReport,
};
use crate::nn::{checkpoint, Network, Tensor};
use crate::{seeded_rng, stream_rng};

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

const CLASSIFIER_STREAM: u64 = 20;
const JS_STREAM: u64 = 21;
const SAMPLE_STREAM: u64 = 30;
const CLASSIFIER_TARGET_ACCURACY: f64 = 0.95;
const SCORE_SPLITS: usize = 10;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => EXIT_CONFIG,
        Error::Divergence { .. } => EXIT_DIVERGED,
        Error::BudgetExhausted { .. } | Error::Calibration(_) => EXIT_BUDGET,
        _ => EXIT_OTHER,
    }
}

/// Files written by a run. Paths that a mode does not produce are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunArtifacts {
    pub config: PathBuf,
    pub metrics: Option<PathBuf>,
    pub generator: Option<PathBuf>,
    pub discriminator: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub ledger: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub artifacts: RunArtifacts,
    pub train: Option<TrainReport>,
    pub scores: Option<ScoreReport>,
    /// One-line human summary.
    pub summary: String,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.train.as_ref().map(|t| t.stop_reason) {
            Some(StopReason::Diverged) => EXIT_DIVERGED,
            _ => EXIT_OK,
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn load_dataset(src: &DataSource) -> Result<Dataset> {
    match src {
        DataSource::Toy(spec) => make_toy(spec),
        DataSource::Csv { path, layout } => read_csv(path, *layout),
    }
}

fn sample_count(cfg: &ExperimentConfig, real: &Dataset) -> usize {
    if cfg.eval.samples > 0 {
        cfg.eval.samples
    } else {
        10 * real.n()
    }
}

/// Classifier for the inception-style score, trained on the real data in
/// rounds until it reaches the target accuracy or the iteration cap.
fn score_classifier(real: &Dataset, cfg: &ExperimentConfig) -> Result<Option<ProbClassifier>> {
    let labels = match real.labels() {
        Some(l) if real.num_classes() >= 2 => l,
        _ => return Ok(None),
    };
    let mut rng = stream_rng(cfg.seed, CLASSIFIER_STREAM);
    let mut clf = ProbClassifier::build(real.d(), &[32, 32], real.num_classes(), &mut rng)?;
    let round = FitConfig {
        iters: 250,
        ..FitConfig::default()
    };
    let mut done = 0;
    let mut acc = 0.0;
    while done < cfg.eval.classifier_iters && acc < CLASSIFIER_TARGET_ACCURACY {
        clf.fit(real.points(), labels, &round, &mut rng)?;
        done += round.iters;
        acc = clf.accuracy(real.points(), labels)?;
    }
    log::info!("score classifier accuracy {acc:.4} after {done} iterations");
    Ok(Some(clf))
}

pub fn score_samples(
    cfg: &ExperimentConfig,
    real: &Dataset,
    samples: &Tensor,
) -> Result<ScoreReport> {
    let mut report = ScoreReport::default();
    if cfg.eval.inception && samples.rows() >= SCORE_SPLITS {
        if let Some(clf) = score_classifier(real, cfg)? {
            report.inception_score = Some(inception_style_score(samples, &clf, SCORE_SPLITS)?);
        }
    }
    if cfg.eval.js {
        let js = JsConfig {
            fit: FitConfig {
                iters: cfg.eval.js_iters,
                ..FitConfig::default()
            },
            ..JsConfig::default()
        };
        report.js_score = Some(js_quality_score(
            real.points(),
            samples,
            &js,
            &mut stream_rng(cfg.seed, JS_STREAM),
        )?);
    }
    if let (true, DataSource::Toy(spec)) = (cfg.eval.coverage, &cfg.data) {
        if matches!(spec.family, Family::Ring | Family::Grid) {
            let centers = mode_centers(spec);
            report.mode_coverage = Some(mode_coverage(
                samples,
                &centers,
                spec.std,
                DEFAULT_THRESHOLD_SD,
            ));
            report.high_quality_fraction = Some(high_quality_fraction(
                samples,
                &centers,
                spec.std,
                DEFAULT_THRESHOLD_SD,
            ));
        }
    }
    Ok(report)
}

fn samples_csv(samples: &Tensor) -> Result<String> {
    Ok(write_csv(
        &Dataset::unlabeled(samples.clone())?,
        CsvLayout::default(),
    ))
}

fn metrics_text(report: &TrainReport) -> String {
    let mut s = String::new();
    for r in &report.metrics {
        s += &r.to_string();
        s.push('\n');
    }
    s
}

/// Writes checkpoints, samples, scores and the metric stream of a trained model.
fn finish_training(
    cfg: &ExperimentConfig,
    out: &Path,
    real: &Dataset,
    model: &GanModel,
    train: TrainReport,
    artifacts: &mut RunArtifacts,
) -> Result<RunOutcome> {
    artifacts.generator = Some(out.join("generator.dpg"));
    checkpoint::save(&model.generator, &out.join("generator.dpg"))?;
    artifacts.discriminator = Some(out.join("discriminator.dpg"));
    checkpoint::save(&model.discriminator, &out.join("discriminator.dpg"))?;
    let mut metrics = metrics_text(&train);
    let mut scores = None;
    if train.stop_reason != StopReason::Diverged {
        let samples = generate_with(
            &model.generator,
            sample_count(cfg, real),
            &mut stream_rng(cfg.seed, SAMPLE_STREAM),
        )?;
        artifacts.samples = Some(write(&out.join("samples.csv"), samples_csv(&samples)?)?);
        let report = score_samples(cfg, real, &samples)?;
        let record = report.to_record();
        artifacts.scores = Some(write(&out.join("scores.txt"), format!("{record}\n"))?);
        metrics += &record;
        metrics.push('\n');
        scores = Some(report);
    }
    artifacts.metrics = Some(write(&out.join("metrics.txt"), metrics)?);
    let summary = format!(
        "stop_reason={} iterations={} epsilon={:?} delta={:?}",
        train.stop_reason,
        train.iterations_run,
        train.epsilon_consumed,
        train.delta_at_budget_epsilon
    );
    Ok(RunOutcome {
        artifacts: artifacts.clone(),
        train: Some(train),
        scores,
        summary,
    })
}

fn build_model(cfg: &ExperimentConfig, data_dim: usize) -> Result<GanModel> {
    GanModel::build(&cfg.model, data_dim, &mut seeded_rng(cfg.seed))
}

/// Runs DP training and always writes the ledger export, even when training
/// fails.
fn dp_train(
    cfg: &ExperimentConfig,
    out: &Path,
    model: &mut GanModel,
    private: &Dataset,
    public: &Dataset,
    artifacts: &mut RunArtifacts,
) -> Result<TrainReport> {
    let mut ledger = LogMomentLedger::new();
    let result = match cfg.mode {
        Mode::Basic => train_basic(model, private, &cfg.gan, &mut ledger),
        _ => train_advanced(model, private, Some(public), &cfg.gan, &mut ledger),
    };
    artifacts.ledger = Some(write(&out.join("ledger.txt"), ledger.export())?);
    result
}

fn run_calibrate(
    cfg: &ExperimentConfig,
    out: &Path,
    artifacts: &mut RunArtifacts,
) -> Result<RunOutcome> {
    let budget = PrivacyBudget::new(cfg.gan.budget.epsilon0, cfg.gan.budget.delta0)?;
    let (q, t) = (cfg.calibrate_q, cfg.calibrate_steps);
    let sigma = sigma_for_budget(q, t, budget)?;
    let eps = epsilon_after(q, sigma, t, budget.delta0)?;
    let line = format!(
        "sigma={sigma:?} epsilon={eps:?} q={q:?} steps={t} target_epsilon={:?} delta={:?}",
        budget.epsilon0, budget.delta0
    );
    artifacts.report = Some(write(&out.join("calibrate.txt"), format!("{line}\n"))?);
    Ok(RunOutcome {
        artifacts: artifacts.clone(),
        train: None,
        scores: None,
        summary: line,
    })
}

fn run_evaluate(
    cfg: &ExperimentConfig,
    out: &Path,
    artifacts: &mut RunArtifacts,
) -> Result<RunOutcome> {
    let real = load_dataset(&cfg.data)?;
    let n = sample_count(cfg, &real);
    let mut rng = stream_rng(cfg.seed, SAMPLE_STREAM);
    let samples = if cfg.eval.pass_through {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..real.n())).collect();
        real.points().select_rows(&idx)
    } else {
        let path = cfg
            .checkpoint
            .as_ref()
            .ok_or_else(|| Error::config("checkpoint", "evaluate needs a generator checkpoint"))?;
        let g: Network = checkpoint::load(path)?;
        if g.output_size() != real.d() {
            return Err(Error::Dimension(format!(
                "checkpoint emits {} values, data has {}",
                g.output_size(),
                real.d()
            )));
        }
        generate_with(&g, n, &mut rng)?
    };
    artifacts.samples = Some(write(&out.join("samples.csv"), samples_csv(&samples)?)?);
    let report = score_samples(cfg, &real, &samples)?;
    let record = report.to_record();
    artifacts.scores = Some(write(&out.join("scores.txt"), format!("{record}\n"))?);
    Ok(RunOutcome {
        artifacts: artifacts.clone(),
        train: None,
        scores: Some(report),
        summary: record,
    })
}

fn run_semi(
    cfg: &ExperimentConfig,
    out: &Path,
    artifacts: &mut RunArtifacts,
) -> Result<RunOutcome> {
    let ds = load_dataset(&cfg.data)?;
    let (public, private) = split_public_private(&ds, cfg.split)?;
    let (generator, mut outcome) = match &cfg.checkpoint {
        Some(path) => (
            checkpoint::load(path)?,
            RunOutcome {
                artifacts: artifacts.clone(),
                train: None,
                scores: None,
                summary: String::new(),
            },
        ),
        None => {
            let mut model = build_model(cfg, ds.d())?;
            let train = dp_train(cfg, out, &mut model, &private, &public, artifacts)?;
            let outcome = finish_training(cfg, out, &ds, &model, train, artifacts)?;
            (model.generator, outcome)
        }
    };
    if outcome.exit_code() != EXIT_OK {
        return Ok(outcome);
    }
    let acc = compare_with_supervised(&generator, &public, &private, &cfg.semi)?;
    let line = format!(
        "semi supervised_accuracy={:?} semi_supervised_accuracy={:?} labeled={} held_out={}",
        acc.supervised,
        acc.semi_supervised,
        public.n(),
        private.n()
    );
    artifacts.report = Some(write(&out.join("semi.txt"), format!("{line}\n"))?);
    outcome.artifacts = artifacts.clone();
    outcome.summary = if outcome.summary.is_empty() {
        line
    } else {
        format!("{} {line}", outcome.summary)
    };
    Ok(outcome)
}

/// Executes the configured pipeline and writes its artifacts under `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = cfg.out.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut artifacts = RunArtifacts {
        config: write(&out.join("config.resolved"), cfg.resolved())?,
        ..RunArtifacts::default()
    };
    match cfg.mode {
        Mode::Calibrate => run_calibrate(cfg, out, &mut artifacts),
        Mode::Evaluate => run_evaluate(cfg, out, &mut artifacts),
        Mode::Semi => run_semi(cfg, out, &mut artifacts),
        Mode::NonPrivate => {
            let ds = load_dataset(&cfg.data)?;
            let mut model = build_model(cfg, ds.d())?;
            let train = train_nonprivate(&mut model, &ds, &cfg.gan)?;
            finish_training(cfg, out, &ds, &model, train, &mut artifacts)
        }
        Mode::Basic | Mode::Advanced => {
            let ds = load_dataset(&cfg.data)?;
            let (public, private) = split_public_private(&ds, cfg.split)?;
            let mut model = build_model(cfg, ds.d())?;
            let train = dp_train(cfg, out, &mut model, &private, &public, &mut artifacts)?;
            finish_training(cfg, out, &ds, &model, train, &mut artifacts)
        }
    }
}
