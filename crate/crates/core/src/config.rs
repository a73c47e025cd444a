//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, dotted section keys, `#` starts a comment.
//! Later assignments override earlier ones, which is how command-line
//! overrides are layered on top of a file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::accountant::{AccountingMode, PrivacyBudget};
use crate::data::{CsvLayout, Family, SplitSpec, ToySpec};
use crate::error::{Error, Result};
use crate::eval::SemiConfig;
use crate::gan::{GanConfig, ModelShape};
use crate::sanitizer::Noising;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    NonPrivate,
    Basic,
    Advanced,
    Semi,
    Evaluate,
    Calibrate,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::NonPrivate,
        Mode::Basic,
        Mode::Advanced,
        Mode::Semi,
        Mode::Evaluate,
        Mode::Calibrate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::NonPrivate => "nonprivate",
            Mode::Basic => "basic",
            Mode::Advanced => "advanced",
            Mode::Semi => "semi",
            Mode::Evaluate => "evaluate",
            Mode::Calibrate => "calibrate",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("mode", format!("unknown mode `{s}`")))
    }
}

/// Where the training data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Toy(ToySpec),
    Csv { path: PathBuf, layout: CsvLayout },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalToggles {
    pub inception: bool,
    pub js: bool,
    pub coverage: bool,
    /// Number of generated samples; 0 means ten times the dataset size.
    pub samples: usize,
    pub classifier_iters: usize,
    pub js_iters: usize,
    /// Score a resample of the real data instead of generator output.
    pub pass_through: bool,
}

impl Default for EvalToggles {
    fn default() -> Self {
        EvalToggles {
            inception: true,
            js: true,
            coverage: true,
            samples: 0,
            classifier_iters: 1000,
            js_iters: 500,
            pass_through: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataSource,
    pub split: SplitSpec,
    pub model: ModelShape,
    pub gan: GanConfig,
    pub semi: SemiConfig,
    pub eval: EvalToggles,
    /// Generator checkpoint for `evaluate` (and optionally `semi`).
    pub checkpoint: Option<PathBuf>,
    pub calibrate_q: f64,
    pub calibrate_steps: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::NonPrivate,
            seed: 0,
            out: PathBuf::from("out"),
            data: DataSource::Toy(ToySpec::default()),
            split: SplitSpec::default(),
            model: ModelShape::default(),
            gan: GanConfig::default(),
            semi: SemiConfig::default(),
            eval: EvalToggles::default(),
            checkpoint: None,
            calibrate_q: 0.01,
            calibrate_steps: 1000,
        }
    }
}

/// Splits config text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", no + 1), "expected `key = value`"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected true or false, got `{v}`"),
        )),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let mut toy = ToySpec::default();
        let mut csv_path: Option<PathBuf> = None;
        let mut layout = CsvLayout::default();
        for (k, v) in pairs {
            let (k, v) = (k.as_str(), v.as_str());
            match k {
                "mode" => c.mode = v.parse()?,
                "seed" => c.seed = parse(k, v)?,
                "out" => c.out = PathBuf::from(v),
                "checkpoint" => c.checkpoint = (!v.is_empty()).then(|| PathBuf::from(v)),
                "data.family" => toy.family = v.parse::<Family>()?,
                "data.modes" => toy.modes = parse(k, v)?,
                "data.radius" => toy.radius = parse(k, v)?,
                "data.std" => toy.std = parse(k, v)?,
                "data.n" => toy.n = parse(k, v)?,
                "data.seed" => toy.seed = parse(k, v)?,
                "data.csv" => csv_path = (!v.is_empty()).then(|| PathBuf::from(v)),
                "data.csv_header" => layout.header = parse_bool(k, v)?,
                "data.csv_label" => layout.label_column = parse_bool(k, v)?,
                "data.csv_pixels" => layout.pixel_range = parse_bool(k, v)?,
                "split.public_fraction" => c.split.public_fraction = parse(k, v)?,
                "split.seed" => c.split.seed = parse(k, v)?,
                "model.latent_dim" => c.model.latent_dim = parse(k, v)?,
                "model.generator_hidden" => c.model.generator_hidden = parse_list(k, v)?,
                "model.discriminator_hidden" => c.model.discriminator_hidden = parse_list(k, v)?,
                "gan.lambda_gp" => c.gan.lambda_gp = parse(k, v)?,
                "gan.n_critic" => c.gan.n_critic = parse(k, v)?,
                "gan.m" => c.gan.m = parse(k, v)?,
                "gan.m_pub" => c.gan.m_pub = parse(k, v)?,
                "gan.lr" => c.gan.adam.lr = parse(k, v)?,
                "gan.beta1" => c.gan.adam.beta1 = parse(k, v)?,
                "gan.beta2" => c.gan.adam.beta2 = parse(k, v)?,
                "gan.clip" => c.gan.clip_c = parse(k, v)?,
                "gan.sigma" => c.gan.sigma = parse(k, v)?,
                "gan.groups" => c.gan.k = parse(k, v)?,
                "gan.warm_iters" => c.gan.t_warm = parse(k, v)?,
                "gan.max_iters" => c.gan.max_iters = parse(k, v)?,
                "gan.noising" => c.gan.noising = v.parse::<Noising>()?,
                "gan.accounting" => c.gan.accounting = v.parse::<AccountingMode>()?,
                "gan.adaptive" => c.gan.adaptive = parse_bool(k, v)?,
                "gan.refresh_stride" => c.gan.refresh_stride = parse(k, v)?,
                "privacy.epsilon" => c.gan.budget.epsilon0 = parse(k, v)?,
                "privacy.delta" => c.gan.budget.delta0 = parse(k, v)?,
                "semi.p_s_final" => c.semi.p_s_final = parse(k, v)?,
                "semi.ramp_start_fraction" => c.semi.ramp_start_fraction = parse(k, v)?,
                "semi.m" => c.semi.m = parse(k, v)?,
                "semi.iters" => c.semi.total_iters = parse(k, v)?,
                "semi.lr" => c.semi.adam.lr = parse(k, v)?,
                "semi.hidden" => c.semi.hidden = parse_list(k, v)?,
                "semi.soft_labels" => c.semi.soft_labels = parse_bool(k, v)?,
                "eval.inception" => c.eval.inception = parse_bool(k, v)?,
                "eval.js" => c.eval.js = parse_bool(k, v)?,
                "eval.coverage" => c.eval.coverage = parse_bool(k, v)?,
                "eval.samples" => c.eval.samples = parse(k, v)?,
                "eval.classifier_iters" => c.eval.classifier_iters = parse(k, v)?,
                "eval.js_iters" => c.eval.js_iters = parse(k, v)?,
                "eval.pass_through" => c.eval.pass_through = parse_bool(k, v)?,
                "calibrate.q" => c.calibrate_q = parse(k, v)?,
                "calibrate.steps" => c.calibrate_steps = parse(k, v)?,
                _ => return Err(Error::config(k, "unknown key")),
            }
        }
        c.gan.seed = c.seed;
        c.semi.seed = c.seed;
        c.data = match csv_path {
            Some(path) => DataSource::Csv { path, layout },
            None => DataSource::Toy(toy),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Toy(t) = &self.data {
            t.validate()?;
        }
        let f = self.split.public_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::config("split.public_fraction", "must lie in (0, 1)"));
        }
        if self.model.latent_dim == 0 {
            return Err(Error::config("model.latent_dim", "must be >= 1"));
        }
        self.gan.validate()?;
        self.semi.validate()?;
        PrivacyBudget::new(self.gan.budget.epsilon0, self.gan.budget.delta0)?;
        if !(self.calibrate_q > 0.0 && self.calibrate_q <= 1.0) {
            return Err(Error::config("calibrate.q", "must lie in (0, 1]"));
        }
        if self.calibrate_steps == 0 {
            return Err(Error::config("calibrate.steps", "must be >= 1"));
        }
        Ok(())
    }

    /// Every key with its effective value, in a fixed order. Parsing the
    /// result gives back an equal configuration.
    pub fn resolved(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("mode", self.mode.name().into());
        put("seed", self.seed.to_string());
        put("out", self.out.display().to_string());
        put(
            "checkpoint",
            self.checkpoint
                .as_ref()
                .map_or(String::new(), |p| p.display().to_string()),
        );
        match &self.data {
            DataSource::Toy(t) => {
                put("data.family", t.family.to_string());
                put("data.modes", t.modes.to_string());
                put("data.radius", format!("{:?}", t.radius));
                put("data.std", format!("{:?}", t.std));
                put("data.n", t.n.to_string());
                put("data.seed", t.seed.to_string());
            }
            DataSource::Csv { path, layout } => {
                put("data.csv", path.display().to_string());
                put("data.csv_header", layout.header.to_string());
                put("data.csv_label", layout.label_column.to_string());
                put("data.csv_pixels", layout.pixel_range.to_string());
            }
        }
        put(
            "split.public_fraction",
            format!("{:?}", self.split.public_fraction),
        );
        put("split.seed", self.split.seed.to_string());
        put("model.latent_dim", self.model.latent_dim.to_string());
        put("model.generator_hidden", join(&self.model.generator_hidden));
        put(
            "model.discriminator_hidden",
            join(&self.model.discriminator_hidden),
        );
        let g = &self.gan;
        put("gan.lambda_gp", format!("{:?}", g.lambda_gp));
        put("gan.n_critic", g.n_critic.to_string());
        put("gan.m", g.m.to_string());
        put("gan.m_pub", g.m_pub.to_string());
        put("gan.lr", format!("{:?}", g.adam.lr));
        put("gan.beta1", format!("{:?}", g.adam.beta1));
        put("gan.beta2", format!("{:?}", g.adam.beta2));
        put("gan.clip", format!("{:?}", g.clip_c));
        put("gan.sigma", format!("{:?}", g.sigma));
        put("gan.groups", g.k.to_string());
        put("gan.warm_iters", g.t_warm.to_string());
        put("gan.max_iters", g.max_iters.to_string());
        put("gan.noising", g.noising.to_string());
        put("gan.accounting", g.accounting.to_string());
        put("gan.adaptive", g.adaptive.to_string());
        put("gan.refresh_stride", g.refresh_stride.to_string());
        put("privacy.epsilon", format!("{:?}", g.budget.epsilon0));
        put("privacy.delta", format!("{:?}", g.budget.delta0));
        let m = &self.semi;
        put("semi.p_s_final", format!("{:?}", m.p_s_final));
        put(
            "semi.ramp_start_fraction",
            format!("{:?}", m.ramp_start_fraction),
        );
        put("semi.m", m.m.to_string());
        put("semi.iters", m.total_iters.to_string());
        put("semi.lr", format!("{:?}", m.adam.lr));
        put("semi.hidden", join(&m.hidden));
        put("semi.soft_labels", m.soft_labels.to_string());
        let e = &self.eval;
        put("eval.inception", e.inception.to_string());
        put("eval.js", e.js.to_string());
        put("eval.coverage", e.coverage.to_string());
        put("eval.samples", e.samples.to_string());
        put("eval.classifier_iters", e.classifier_iters.to_string());
        put("eval.js_iters", e.js_iters.to_string());
        put("eval.pass_through", e.pass_through.to_string());
        put("calibrate.q", format!("{:?}", self.calibrate_q));
        put("calibrate.steps", self.calibrate_steps.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_round_trips() {
        let text =
            "mode = advanced\nseed = 3 # comment\ngan.sigma = 0.5\nmodel.generator_hidden = 8,8\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.gan.sigma, 0.5);
        assert_eq!(c.gan.seed, 3);
        let back = ExperimentConfig::parse(&c.resolved()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn errors_name_the_field() {
        for (text, field) in [
            ("gan.sigma = abc", "gan.sigma"),
            ("bogus = 1", "bogus"),
            ("gan.n_critic = 0", "gan.n_critic"),
            ("gan.accounting = loose", "accounting"),
        ] {
            match ExperimentConfig::parse(text) {
                Err(Error::Config { field: f, .. }) => assert!(f.contains(field), "{f} vs {field}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn later_assignments_win() {
        let c = ExperimentConfig::parse("gan.clip = 1.0\ngan.clip = 2.0").unwrap();
        assert_eq!(c.gan.clip_c, 2.0);
    }
}
