use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use rsl_core::lab::{compare_runs, resolve_output_dir, run_experiment, Experiment, ExperimentConfig, Status};

/// Ricci flow stability laboratory.
///
/// Exit codes: 0 all assertions passed, 1 an assertion failed, 2 a solver did
/// not converge, 3 bad configuration or usage.
#[derive(Debug, Parser)]
#[command(name = "rsl", version)]
struct Cli {
    /// curvature, lambda, spectrum, decompose, secondvar, flow, stability,
    /// monotonicity, gauge-transfer, or `compare` followed by two run directories
    experiment: String,
    /// Run directories for `compare`
    dirs: Vec<PathBuf>,
    /// TOML experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the perturbation seed and disables any sweep
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to the config, then RSL_OUT)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Independent sweep points run concurrently
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("rsl: {msg}");
    ExitCode::from(Status::ConfigError.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(Status::ConfigError.code() as u8);
        }
    };

    if cli.experiment == "compare" {
        let [a, b] = cli.dirs.as_slice() else {
            return config_error("compare needs exactly two run directories");
        };
        return match compare_runs(a, b) {
            Ok(report) => {
                println!("{}", serde_json::to_string_pretty(&report).expect("serialisable"));
                ExitCode::SUCCESS
            }
            Err(e) => config_error(e),
        };
    }

    let Some(experiment) = Experiment::parse(&cli.experiment) else {
        return config_error(format!("unknown experiment `{}`", cli.experiment));
    };
    if !cli.dirs.is_empty() {
        return config_error("unexpected positional arguments");
    }
    let Some(path) = &cli.config else {
        return config_error("--config is required");
    };
    if cli.jobs == 0 {
        return config_error("--jobs must be at least 1");
    }
    let mut cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    cfg.experiment = experiment;
    if let Some(seed) = cli.seed {
        cfg.perturbation.seed = seed;
        cfg.sweep = None;
    }
    let out = resolve_output_dir(cli.out.as_deref(), &cfg);

    let outcome = match run_experiment(&cfg, &out, cli.jobs) {
        Ok(o) => o,
        Err(e) => return config_error(e),
    };
    for p in &outcome.points {
        println!("seed {}: {:?}", p.seed, p.status);
    }
    for f in outcome.failures() {
        eprintln!("rsl: {f}");
    }
    println!("{} -> {} ({:?})", experiment.name(), out.display(), outcome.status);
    ExitCode::from(outcome.code() as u8)
}
