//! `cgolab`: scenario-driven runs of the reconstruction pipeline.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::RunDir;
use scenario::Source;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<cgolab::Error> for CliError {
    fn from(e: cgolab::Error) -> Self {
        use cgolab::Error::*;
        let msg = e.to_string();
        match e {
            Shape(_) | Domain(_) => CliError::Validation(msg),
            Io(_) | Format(_) => CliError::Io(msg),
            AssumptionA(_) | Solver { .. } | NotGaugeEquivalent(_) | Conditioning(_) | Extrapolation(_)
            | Inconsistent(_) => CliError::Numerical(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cgolab", version, about = "Forward solves, CGO diagnostics and reconstructions from a scenario file")]
struct Cli {
    /// Scenario file (TOML). The built-in default scenario is used when absent.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output root; each command writes into a subdirectory named after it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to CGOLAB_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Coefficients and Dirichlet solutions at every frequency.
    Forward,
    /// DtN maps of both members of the pair and their distance.
    Dtn,
    /// CGO residuals along the h ladder.
    CgoDiagnose,
    /// Curl, gauge and q identity of the pair (oracle mode).
    Reconstruct,
    /// Boundary traces of the potential from localized probes.
    Boundary,
    /// Multi-frequency extraction of the fluid parameters.
    Fluids,
    /// The invariant suite; exits 2 if any check fails.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Dtn => "dtn",
            Command::CgoDiagnose => "cgo-diagnose",
            Command::Reconstruct => "reconstruct",
            Command::Boundary => "boundary",
            Command::Fluids => "fluids",
            Command::Verify => "verify",
        }
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("CGOLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Validation(format!("CGOLAB_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(CliError::Validation("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure {n} threads: {e}")))?;
    }
    let source = match &cli.scenario {
        Some(p) => Source::read(p)?,
        None => Source::default_scenario(),
    };
    let scenario = source.parse(cli.seed)?;
    let root = cli.out.clone().or_else(|| scenario.output.clone()).unwrap_or_else(|| PathBuf::from("cgolab-out"));
    let command = cli.command;
    let mut dir = RunDir::create(&root, command.name())?;
    let result = match command {
        Command::Forward => commands::forward(&scenario, &mut dir),
        Command::Dtn => commands::dtn(&scenario, &mut dir),
        Command::CgoDiagnose => commands::cgo_diagnose(&scenario, &mut dir),
        Command::Reconstruct => commands::reconstruct(&scenario, &mut dir),
        Command::Boundary => commands::boundary(&scenario, &mut dir),
        Command::Fluids => commands::fluids(&scenario, &mut dir),
        Command::Verify => commands::verify(scenario.seed, &mut dir).and_then(|ok| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Numerical("invariant checks failed".into()))
            }
        }),
    };
    match result {
        Ok(()) => {
            let path = dir.finish(&scenario.sha256, scenario.seed)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Err(e) => {
            dir.discard();
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cgolab: {e}");
            ExitCode::from(e.code())
        }
    }
}
