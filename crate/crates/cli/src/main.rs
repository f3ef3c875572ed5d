//! `xtalk`: simulate Bell-test campaigns, analyze trial logs with the PBR
//! protocol, and summarize the resulting reports.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 when a
//! numerical solver fails. Errors are printed to stderr as one JSON object.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xtalk_core::Error;

#[derive(Parser, Debug)]
#[command(name = "xtalk", version, about = "Cross-talk detection from CHSH Bell tests")]
struct Cli {
    /// TOML configuration file; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, echoed into every output.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a campaign of Bell tests and write a JSONL trial log.
    Simulate(SimulateArgs),
    /// Run the PBR protocol on every test of a trial log.
    Analyze(AnalyzeArgs),
    /// Tabulate rejections and p-value histograms from analysis reports.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// `cnl` (maximally violating) or `cl` (product state).
    #[arg(long)]
    pub circuit: Option<String>,
    /// Trials per test.
    #[arg(long)]
    pub n: Option<u64>,
    /// Number of tests.
    #[arg(long)]
    pub m: Option<u64>,
    /// Probability of flipping Alice's outcome when y = 1.
    #[arg(long)]
    pub crosstalk_ba: Option<f64>,
    /// Probability of flipping Bob's outcome when x = 1.
    #[arg(long)]
    pub crosstalk_ab: Option<f64>,
    #[arg(long)]
    pub depolarizing: Option<f64>,
    /// Switch to the `--drift-*` parameters from this trial index on.
    #[arg(long)]
    pub drift_at: Option<u64>,
    #[arg(long, requires = "drift_at")]
    pub drift_crosstalk_ba: Option<f64>,
    #[arg(long, requires = "drift_at")]
    pub drift_crosstalk_ab: Option<f64>,
    #[arg(long, requires = "drift_at")]
    pub drift_depolarizing: Option<f64>,
    /// Comma-separated P(x,y) for (0,0),(0,1),(1,0),(1,1).
    #[arg(long)]
    pub input_dist: Option<String>,
    /// Draw a separate input sequence for every test.
    #[arg(long)]
    pub independent_inputs: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_est: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated subset of l,q1ab,q1,ns,owns-ab,owns-ba.
    #[arg(long)]
    pub hypotheses: Option<String>,
    /// auto (moment relaxations only), always, or never.
    #[arg(long)]
    pub regularize: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Sort each test by trial index instead of rejecting unordered logs.
    #[arg(long)]
    pub sort_trials: bool,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub reports: PathBuf,
    /// Directory receiving summary.csv and histogram.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated significance levels.
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long)]
    pub bin_width: Option<f64>,
    #[arg(long)]
    pub device: Option<String>,
    #[arg(long)]
    pub qubit_pair: Option<String>,
    /// Circuit label; defaults to the one recorded upstream.
    #[arg(long)]
    pub circuit: Option<String>,
}

const EXIT_INVALID: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn report_error(kind: &str, message: &str, code: u8) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message }, "exit_code": code });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return report_error("usage", e.to_string().trim_end(), EXIT_INVALID);
        }
    };
    let result = config::FileConfig::load(cli.config.as_deref()).and_then(|file| match &cli.command {
        Command::Simulate(args) => commands::simulate(args, &file, cli.seed),
        Command::Analyze(args) => commands::analyze(args, &file, cli.seed),
        Command::Report(args) => commands::report(args, &file, cli.seed),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_solver_failure() { EXIT_SOLVER } else { EXIT_INVALID };
            report_error(e.kind(), &error_chain(&e), code)
        }
    }
}

fn error_chain(e: &Error) -> String {
    let mut msg = e.to_string();
    let mut source = std::error::Error::source(e);
    // SolverFailure already renders its source inline.
    if matches!(e, Error::SolverFailure { .. }) {
        source = None;
    }
    while let Some(s) = source {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        source = s.source();
    }
    msg
}
