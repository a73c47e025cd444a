use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dpgan::config::{parse_pairs, ExperimentConfig};
use dpgan::run::{exit_code, run, EXIT_CONFIG};
use dpgan::Error;

/// Differentially private GAN training, evaluation and calibration.
#[derive(Debug, Parser)]
#[command(name = "dpgan", version)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["nonprivate", "basic", "advanced", "semi", "evaluate", "calibrate"])]
    mode: Option<String>,
    #[arg(long, value_name = "N")]
    seed: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Noise multiplier.
    #[arg(long)]
    sigma: Option<String>,
    /// Global clipping bound.
    #[arg(long)]
    clip: Option<String>,
    /// Number of clipping groups (advanced mode).
    #[arg(long)]
    groups: Option<String>,
    /// Privacy budget epsilon.
    #[arg(long)]
    epsilon: Option<String>,
    /// Privacy budget delta.
    #[arg(long)]
    delta: Option<String>,
    /// Warm-start iterations on public data (advanced mode).
    #[arg(long)]
    warm_iters: Option<String>,
    #[arg(long, value_parser = ["sound", "paper"])]
    accounting: Option<String>,
    #[arg(long, value_parser = ["per_batch", "per_example"])]
    noising: Option<String>,
    /// Sampling ratio for calibrate.
    #[arg(long)]
    q: Option<String>,
    /// Step count for calibrate.
    #[arg(long)]
    steps: Option<String>,
    /// Generator checkpoint for evaluate and semi.
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<String>,
    /// Any other configuration key, as KEY=VALUE.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Cli {
    fn overrides(&self) -> Result<Vec<(String, String)>, Error> {
        let named = [
            ("mode", &self.mode),
            ("seed", &self.seed),
            ("out", &self.out),
            ("gan.sigma", &self.sigma),
            ("gan.clip", &self.clip),
            ("gan.groups", &self.groups),
            ("privacy.epsilon", &self.epsilon),
            ("privacy.delta", &self.delta),
            ("gan.warm_iters", &self.warm_iters),
            ("gan.accounting", &self.accounting),
            ("gan.noising", &self.noising),
            ("calibrate.q", &self.q),
            ("calibrate.steps", &self.steps),
            ("checkpoint", &self.checkpoint),
        ];
        let mut pairs: Vec<(String, String)> = named
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::config(s.as_str(), "expected KEY=VALUE"))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut pairs = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    pairs.extend(cli.overrides()?);
    ExperimentConfig::from_pairs(&pairs)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if matches!(e, Error::Io { .. }) {
                EXIT_CONFIG
            } else {
                exit_code(&e)
            };
            return ExitCode::from(code as u8);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
