use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dpgan::accountant::{epsilon_after, sigma_for_budget, PrivacyBudget};
use dpgan::config::ExperimentConfig;
use dpgan::gan::{parse_metrics, Phase};
use tempfile::TempDir;

const SMALL: &str = "\
data.n = 800
model.latent_dim = 4
model.generator_hidden = 8
model.discriminator_hidden = 8
gan.m = 16
eval.samples = 200
eval.classifier_iters = 250
eval.js_iters = 50
";

fn dpgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpgan"))
        .args(args)
        .output()
        .unwrap()
}

fn small_config(dir: &TempDir, extra: &str) -> PathBuf {
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path
}

fn run_in(dir: &TempDir, extra: &str, args: &[&str]) -> (Output, PathBuf) {
    let cfg = small_config(dir, extra);
    let out = dir.path().join("out");
    let mut all = vec![
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    all.extend_from_slice(args);
    (dpgan(&all), out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn text(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn nonprivate_smoke_run_writes_every_artifact() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(
        &dir,
        "gan.max_iters = 500\n",
        &["--mode", "nonprivate", "--seed", "3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "config.resolved",
        "metrics.txt",
        "generator.dpg",
        "discriminator.dpg",
        "samples.csv",
        "scores.txt",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let records = parse_metrics(&text(&out.join("metrics.txt"))).unwrap();
    assert_eq!(records.len(), 500);
    assert!(records.iter().all(|r| r.phase == Phase::NonPrivate));
    assert_eq!(records.last().unwrap().iter, 500);

    let resolved = text(&out.join("config.resolved"));
    let again = ExperimentConfig::parse(&resolved).unwrap();
    assert_eq!(again.resolved(), resolved);
    assert!(resolved.contains("gan.max_iters = 500") || resolved.contains("gan.max_iters=500"));
    assert_eq!(text(&out.join("samples.csv")).lines().count(), 200);
}

#[test]
fn infeasible_budget_exits_four_and_still_writes_ledger() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(
        &dir,
        "gan.max_iters = 50\n",
        &["--mode", "basic", "--epsilon", "0.1"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(out.join("ledger.txt").is_file());
    assert!(stderr(&o).contains("budget"), "{}", stderr(&o));
}

#[test]
fn small_budget_stops_early_with_prior_record_inside_budget() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(
        &dir,
        "gan.max_iters = 5000\n",
        &["--mode", "basic", "--epsilon", "0.5", "--sigma", "3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("stop_reason=budget_exhausted"));
    let records = parse_metrics(&text(&out.join("metrics.txt"))).unwrap();
    assert!(records.len() >= 2 && records.len() < 5000);
    let prior = &records[records.len() - 2];
    assert!(prior.epsilon <= 0.5, "{}", prior.epsilon);
    assert!(records.last().unwrap().delta > 1e-5);
    assert!(out.join("ledger.txt").is_file());
}

#[test]
fn evaluate_uses_checkpoint_and_dumps_requested_rows() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "gan.max_iters = 20\n", &["--mode", "nonprivate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = out.join("generator.dpg");
    let eval_out = dir.path().join("eval");
    let cfg = small_config(&dir, "eval.samples = 321\n");
    let o = dpgan(&[
        "--config",
        cfg.to_str().unwrap(),
        "--mode",
        "evaluate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        eval_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(text(&eval_out.join("samples.csv")).lines().count(), 321);
    assert!(text(&eval_out.join("scores.txt")).starts_with("scores "));
}

#[test]
fn evaluate_pass_through_scores_real_data() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "eval.pass_through = true\n", &["--mode", "evaluate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scores = text(&out.join("scores.txt"));
    assert!(
        scores.contains("js_mean=") && scores.contains("mode_coverage=1"),
        "{scores}"
    );
}

#[test]
fn missing_checkpoint_is_reported_with_its_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere").join("g.dpg");
    let (o, _) = run_in(
        &dir,
        "",
        &[
            "--mode",
            "evaluate",
            "--checkpoint",
            missing.to_str().unwrap(),
        ],
    );
    assert_ne!(o.status.code(), Some(0));
    assert!(
        stderr(&o).contains(missing.to_str().unwrap()),
        "{}",
        stderr(&o)
    );
}

#[test]
fn malformed_checkpoint_names_byte_offset() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.dpg");
    std::fs::write(&bad, b"DPG1\x01\x00").unwrap();
    let (o, _) = run_in(
        &dir,
        "",
        &["--mode", "evaluate", "--checkpoint", bad.to_str().unwrap()],
    );
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("offset"), "{}", stderr(&o));
}

fn calibrate(dir: &TempDir, steps: &str) -> (f64, f64) {
    let out = dir.path().join(format!("cal-{steps}"));
    let o = dpgan(&[
        "--mode",
        "calibrate",
        "--q",
        "0.01",
        "--steps",
        steps,
        "--epsilon",
        "2",
        "--delta",
        "1e-5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = text(&out.join("calibrate.txt"));
    let field = |k: &str| -> f64 {
        line.split_whitespace()
            .find_map(|t| t.strip_prefix(&format!("{k}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    (field("sigma"), field("epsilon"))
}

#[test]
fn calibrate_round_trips_and_matches_library() {
    let dir = TempDir::new().unwrap();
    let (sigma, eps) = calibrate(&dir, "1000");
    assert!(eps <= 2.0);
    let lib = sigma_for_budget(0.01, 1000, PrivacyBudget::new(2.0, 1e-5).unwrap()).unwrap();
    assert_eq!(sigma, lib);
    assert_eq!(eps, epsilon_after(0.01, lib, 1000, 1e-5).unwrap());
    let (doubled, _) = calibrate(&dir, "2000");
    assert!(doubled >= sigma);
}

#[test]
fn config_errors_name_the_field_and_exit_two() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run_in(&dir, "gan.no_such_knob = 1\n", &["--mode", "nonprivate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gan.no_such_knob"), "{}", stderr(&o));

    let (o, _) = run_in(&dir, "", &["--mode", "basic", "--sigma", "lots"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gan.sigma"), "{}", stderr(&o));

    let o = dpgan(&["--set", "novalue"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("novalue"));
}

#[test]
fn unknown_mode_is_rejected_by_the_parser() {
    let o = dpgan(&["--mode", "turbo"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("turbo"));
}

#[test]
fn semi_mode_reports_both_accuracies() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(
        &dir,
        "gan.max_iters = 10\nsplit.public_fraction = 0.1\nsemi.iters = 60\n",
        &["--mode", "semi", "--epsilon", "50"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let line = text(&out.join("semi.txt"));
    assert!(
        line.contains("supervised_accuracy=") && line.contains("semi_supervised_accuracy="),
        "{line}"
    );
}
