//! Command-line front end: configuration, CSV ingestion and the
//! `solve | simulate | oracle | heuristic | analyze | bench` subcommands.

pub mod commands;
pub mod config;
pub mod data;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dronenet::solver::{Mode, SolveStatus};
use thiserror::Error;

use crate::commands::{Output, Status};
use crate::config::{ConfigError, RunConfig};
use crate::data::DataError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("solver stopped ({0:?}) without a design")]
    NoDesign(SolveStatus),
    #[error("{0}")]
    Failed(String),
    #[error("cannot write {path}: {msg}")]
    Write { path: PathBuf, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NoDesign(SolveStatus::Infeasible) => 4,
            CliError::NoDesign(_) | CliError::Failed(_) | CliError::Write { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dronenet", version, about = "Drone-base network design under congestion")]
pub struct Cli {
    /// JSON run configuration; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Solver mode: REFO, OA or OA_BC.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Solver wall-clock limit, seconds.
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Seed the solver with the greedy design.
    #[arg(long, global = true)]
    pub warm_start: bool,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize the network with branch-and-cut.
    Solve,
    /// Replay or generate requests against a design.
    Simulate {
        /// Design JSON (a bare design or a solve report); solved when absent.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Certified optimum by exhaustive enumeration (tiny instances only).
    Oracle {
        #[arg(long, default_value_t = 50_000_000)]
        budget: u64,
    },
    /// Busiest-bases greedy design.
    Heuristic,
    /// Survival, QALY and cost tables.
    Analyze {
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Mode × instance matrix on generated instances.
    Bench {
        /// Demand counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "20,40")]
        sizes: Vec<usize>,
        /// Instances per size.
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
    /// Print the full default configuration.
    Template,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run(cli: Cli, env: impl IntoIterator<Item = (String, String)>) -> i32 {
    match execute(cli, env) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, env: impl IntoIterator<Item = (String, String)>) -> Result<Status, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), env)?;
    if let Some(m) = &cli.mode {
        cfg.solver.mode = m.clone();
    }
    if let Some(t) = cli.time_limit {
        cfg.solver.time_limit = Some(t);
    }
    if let Some(s) = cli.seed {
        cfg.solver.seed = s;
    }
    if cli.warm_start {
        cfg.solver.warm_start = true;
    }
    cfg.validate()?;
    let seed = cfg.solver.seed;
    let out = match &cli.command {
        Command::Solve => commands::cmd_solve(&cfg)?,
        Command::Simulate { design } => commands::cmd_simulate(&cfg, design.as_deref(), seed)?,
        Command::Oracle { budget } => commands::cmd_oracle(&cfg, *budget)?,
        Command::Heuristic => commands::cmd_heuristic(&cfg)?,
        Command::Analyze { design } => commands::cmd_analyze(&cfg, design.as_deref())?,
        Command::Bench { sizes, count } => return bench(&cfg, &cli, sizes, *count, seed),
        Command::Template => Output {
            body: serde_json::to_string_pretty(&RunConfig::default()).expect("defaults serialize") + "\n",
            status: Status::Success,
        },
    };
    emit(cli.out.as_ref(), &out.body)?;
    Ok(out.status)
}

fn emit(path: Option<&PathBuf>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| CliError::Write {
            path: p.clone(),
            msg: e.to_string(),
        }),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn bench(cfg: &RunConfig, cli: &Cli, sizes: &[usize], count: usize, seed: u64) -> Result<Status, CliError> {
    let modes = match &cli.mode {
        Some(_) => vec![cfg.mode()?],
        None => Mode::ALL.to_vec(),
    };
    let spec = commands::BenchSpec {
        sizes: sizes.to_vec(),
        per_size: count,
        seed,
        time_limit: cfg.solver.time_limit.unwrap_or(60.0),
        modes,
    };
    let instances = commands::bench_instances(&spec);
    let rows = commands::run_bench(&spec, &instances)?;
    let results = commands::bench_csv(&rows);
    let profile = commands::profile_csv(&rows, &spec.modes);
    let summary = commands::profile_summary(&rows, &spec.modes, spec.time_limit);
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Write {
                path: dir.clone(),
                msg: e.to_string(),
            })?;
            emit(Some(&dir.join("bench.csv")), &results)?;
            emit(Some(&dir.join("profile.csv")), &profile)?;
            emit(Some(&dir.join("summary.txt")), &summary)?;
            print!("{summary}");
        }
        None => {
            print!("{results}");
            eprint!("{summary}");
        }
    }
    Ok(Status::Success)
}
