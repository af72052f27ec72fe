//! `strongconv`: deterministic JSON/CSV reports for the strongconv toolkit.
//!
//! Exit codes: 0 success, 2 input error, 3 precondition violation,
//! 4 inconclusive optimizer.

mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use strongconv::recovery::FitOptions;
use strongconv::{Error, Tolerances};

#[derive(Debug, Parser)]
#[command(name = "strongconv", version)]
#[command(about = "Choi, convergence, recovery and entropy diagnostics for quantum operations")]
struct Cli {
    /// Index window `N_MIN:N_MAX` for sequence commands.
    #[arg(long, global = true, value_parser = parse_window)]
    window: Option<(usize, usize)>,

    /// Ladder ranks, e.g. `1,2,4`; `qcmi` takes `A_RANKS:C_RANKS`.
    #[arg(long, global = true)]
    ladder: Option<String>,

    /// Tolerance override `NAME=VALUE`; `--tol.NAME VALUE` is also accepted.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,

    /// Base seed of randomized solvers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Choi operator, Choi rank, membership witness and roundtrip residual.
    Cj {
        channel: PathBuf,
        /// Input state to purify (default: fixed faithful state).
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Tail profile, dual ladder, gap and limit extraction for a family.
    Diagnose {
        family: PathBuf,
        /// Reference state on the input (default: fixed faithful state).
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Petz recovery map of a channel at a reference state.
    Petz {
        channel: PathBuf,
        sigma: PathBuf,
        /// Also test reversibility on this state.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// Ladder-restricted conditional mutual information of a tripartite state.
    Qcmi {
        state: PathBuf,
        /// Candidate recovery channel `B -> BC` to test against the fidelity bound.
        #[arg(long)]
        recovery: Option<PathBuf>,
    },
    /// Degradability and anti-degradability certificate.
    Degradability {
        channel: PathBuf,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 20000)]
        max_iterations: usize,
    },
    /// Relative-entropy convergence along input and map sequences.
    EntropyHarness { config: PathBuf },
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    tolerances: Tolerances,
    report: T,
}

fn parse_window(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("window '{s}' is not of the form N_MIN:N_MAX"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("window bound '{x}': {e}"));
    let (a, b) = (parse(a)?, parse(b)?);
    if a > b {
        return Err(format!("window {a}:{b} is empty"));
    }
    Ok((a, b))
}

fn parse_ranks(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidInput(format!("ladder rank '{x}': {e}")).into())
        })
        .collect()
}

/// Rewrites `--tol.NAME=V` and `--tol.NAME V` into `--tol NAME=V`.
fn normalize_args(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--tol.") {
            Some(rest) => {
                out.push("--tol".to_string());
                if rest.contains('=') {
                    out.push(rest.to_string());
                } else {
                    let value = it.next().unwrap_or_default();
                    out.push(format!("{rest}={value}"));
                }
            }
            None => out.push(arg),
        }
    }
    out
}

fn tolerances(overrides: &[String]) -> Result<Tolerances> {
    let mut tol = Tolerances::default();
    for item in overrides {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("tolerance override '{item}' is not NAME=VALUE")))?;
        let value: f64 = value
            .parse()
            .map_err(|e| Error::InvalidInput(format!("tolerance {name}: {e}")))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidInput(format!("tolerance {name} must be finite and non-negative")).into());
        }
        if !tol.set(name, value) {
            return Err(Error::InvalidInput(format!(
                "unknown tolerance '{name}'; known: {}",
                Tolerances::NAMES.join(", ")
            ))
            .into());
        }
    }
    Ok(tol)
}

fn render<T: Serialize>(cli: &Cli, command: &str, tol: &Tolerances, report: T) -> Result<String> {
    let env = Envelope {
        command,
        seed: cli.seed,
        tolerances: *tol,
        report,
    };
    match cli.format {
        Format::Json => output::to_json(&env),
        Format::Csv => output::to_flat_csv(&env),
    }
}

fn run(cli: &Cli) -> Result<String> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let tol = tolerances(&cli.tol)?;
    let ranks = cli.ladder.as_deref();
    match &cli.command {
        Command::Cj { channel, state } => {
            render(cli, "cj", &tol, commands::cj(channel, state.as_deref(), &tol)?)
        }
        Command::Diagnose { family, state } => {
            let ladder = ranks.map(parse_ranks).transpose()?;
            let report = commands::diagnose_family(family, state.as_deref(), cli.window, ladder.as_deref(), &tol)?;
            render(cli, "diagnose", &tol, report)
        }
        Command::Petz { channel, sigma, rho } => {
            render(cli, "petz", &tol, commands::petz(channel, sigma, rho.as_deref(), &tol)?)
        }
        Command::Qcmi { state, recovery } => {
            let ladders = match ranks {
                Some(s) => {
                    let (a, c) = s.split_once(':').unwrap_or((s, s));
                    Some((parse_ranks(a)?, parse_ranks(c)?))
                }
                None => None,
            };
            let ladders = ladders.as_ref().map(|(a, c)| (a.as_slice(), c.as_slice()));
            render(cli, "qcmi", &tol, commands::qcmi_state(state, ladders, recovery.as_deref(), &tol)?)
        }
        Command::Degradability {
            channel,
            restarts,
            max_iterations,
        } => {
            let opts = FitOptions {
                restarts: *restarts,
                seed: cli.seed,
                max_iterations: *max_iterations,
                ..FitOptions::default()
            };
            render(cli, "degradability", &tol, commands::degradability(channel, &opts, &tol)?)
        }
        Command::EntropyHarness { config } => {
            let report = commands::entropy_harness(config, cli.window, &tol)?;
            match cli.format {
                Format::Csv => Ok(report.to_csv()),
                Format::Json => render(cli, "entropy-harness", &tol, report),
            }
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(
            Error::PreconditionViolated(_)
            | Error::RankOneContradiction { .. }
            | Error::NoLimitDetected { .. },
        ) => 3,
        Some(Error::Inconclusive(_)) => 4,
        _ => 2,
    }
}

fn write_report(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(normalize_args(std::env::args())) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = run(&cli).and_then(|text| write_report(cli.out.as_deref(), &text));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
