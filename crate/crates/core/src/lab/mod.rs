//! Experiment driver: configuration, execution, artifacts and run comparison.

mod compare;
mod config;
mod experiments;

pub use compare::{compare_runs, ColumnDeviation, CompareReport};
pub use config::{
    Experiment, ExperimentConfig, FlowParams, GridConfig, PerturbationConfig, PerturbationKind, SpectrumParams,
    SweepConfig, Tolerances,
};

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed = 0,
    AssertionFailed = 1,
    NotConverged = 2,
    ConfigError = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::NotConverged(_) => Self::NotConverged,
            Error::NotPositiveDefinite { .. } | Error::NonFinite { .. } => Self::AssertionFailed,
            _ => Self::ConfigError,
        }
    }
}

/// Result of one seed.
#[derive(Debug, Clone, Serialize)]
pub struct PointOutcome {
    pub seed: u64,
    pub status: Status,
    pub failures: Vec<String>,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub experiment: Experiment,
    pub status: Status,
    pub output_dir: PathBuf,
    pub points: Vec<PointOutcome>,
}

impl RunOutcome {
    pub fn code(&self) -> i32 {
        self.status.code()
    }

    pub fn failures(&self) -> Vec<String> {
        self.points
            .iter()
            .flat_map(|p| p.failures.iter().map(move |f| format!("seed {}: {f}", p.seed)))
            .collect()
    }
}

/// Output directory: explicit choice, then the config, then `RSL_OUT`, then `rsl_out`.
pub fn resolve_output_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os("RSL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("rsl_out"))
}

/// Runs every seed of `cfg` into `out`, at most `jobs` at a time.
///
/// Writes `config.toml` (the resolved configuration, re-runnable as is) and
/// `result.json` at the top level; with several seeds each gets a
/// `seed_<s>` subdirectory.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let mut echo = cfg.clone();
    echo.output_dir = Some(out.to_path_buf());
    fs::write(out.join("config.toml"), echo.to_toml())?;

    let seeds = cfg.seeds();
    let single = seeds.len() == 1;
    let run = |&seed: &u64| {
        let dir = if single { out.to_path_buf() } else { out.join(format!("seed_{seed}")) };
        run_point(cfg, seed, &dir)
    };
    let points: Vec<PointOutcome> = if jobs > 1 && !single {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(run).collect())
    } else {
        seeds.iter().map(run).collect()
    };
    let status = points.iter().map(|p| p.status).max().unwrap_or(Status::Passed);
    let outcome = RunOutcome { experiment: cfg.experiment, status, output_dir: out.to_path_buf(), points };
    let json = serde_json::to_string_pretty(&outcome).expect("serialisable");
    fs::write(out.join("result.json"), json)?;
    Ok(outcome)
}

fn run_point(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> PointOutcome {
    let result = fs::create_dir_all(dir)
        .map_err(Error::from)
        .and_then(|_| experiments::run(cfg, seed, dir));
    match result {
        Ok((failures, summary)) => PointOutcome {
            seed,
            status: if failures.is_empty() { Status::Passed } else { Status::AssertionFailed },
            failures,
            summary,
        },
        Err(e) => PointOutcome {
            seed,
            status: Status::of_error(&e),
            failures: vec![e.to_string()],
            summary: serde_json::Value::Null,
        },
    }
}
