//! `sdp`: batch front end for the ADMM solver and its diagnostics.
//!
//! Every invocation prints exactly one status line to stderr. Exit codes are
//! 0 on success, 2 when a run stops on an iteration/time limit (or a
//! verification check misses its target) and 1 on errors.

mod diagnose;
mod eb;
mod generate;
mod manifest;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "sdp", version, about = "ADMM for semidefinite programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one or more instances and write run directories.
    Solve(SolveArgs),
    /// Analyze a finished run directory.
    Diagnose(DiagnoseArgs),
    /// Measure the first-order remainder of the PSD projection around Z.
    EbVerify(EbArgs),
    /// Write a generated instance in SDPA format.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Zero,
    Gaussian,
}

/// Solver flags shared by manifests; each overrides the manifest field.
#[derive(Args, Clone, Debug, Default)]
pub struct SolverFlags {
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub init: Option<InitKind>,
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub trace_every: Option<usize>,
}

#[derive(Args)]
pub struct SolveArgs {
    /// JSON manifest; repeat for a batch.
    #[arg(long)]
    pub manifest: Vec<PathBuf>,
    /// SDPA instance, used instead of a manifest.
    #[arg(long, conflicts_with = "manifest")]
    pub instance: Option<PathBuf>,
    /// Run directory (for a batch, the parent of one directory per manifest).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    /// Run directory.
    pub run: Option<PathBuf>,
    /// Manifest whose `out` names the run directory.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Run directory, same as the positional argument.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HKind {
    /// Gaussian symmetric direction.
    Generic,
    /// Block diagonal in the eigenbasis of Z, so `H_O = 0`.
    Block,
    /// `t·H_d + t²·H_o`: off-diagonal part of order `t²`.
    OffQuadratic,
}

#[derive(Args)]
pub struct EbArgs {
    /// `Z` as a JSON matrix, or a run directory (uses its final iterate).
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// Direction family.
    #[arg(long, value_enum)]
    pub h: Option<HKind>,
    /// Direction as a JSON matrix, instead of a generated family.
    #[arg(long, conflicts_with = "h")]
    pub h_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory for `eb.csv` and `eb.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenerateKind {
    Planted,
    Maxcut,
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Taken from the manifest when omitted.
    #[arg(value_enum)]
    pub kind: Option<GenerateKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Plant a primal nondegeneracy failure.
    #[arg(long)]
    pub degenerate: bool,
    #[arg(long)]
    pub near_sc_gap: Option<f64>,
    /// Edge list for `maxcut`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output `.dat-s` path; planted instances also get `<stem>.cert.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit code plus the stderr status line.
pub struct Outcome {
    pub code: u8,
    pub status: String,
}

impl Outcome {
    pub fn new(code: u8, status: impl Into<String>) -> Self {
        Outcome {
            code,
            status: status.into(),
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                eprintln!("ok");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", one_line(first));
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve::run(a),
        Command::Diagnose(a) => diagnose::run(a),
        Command::EbVerify(a) => eb::run(a),
        Command::Generate(a) => generate::run(a),
    };
    match result {
        Ok(o) => {
            eprintln!("{}", one_line(&o.status));
            ExitCode::from(o.code)
        }
        Err(e) => {
            eprintln!("error: {}", one_line(&format!("{e:#}")));
            ExitCode::from(1)
        }
    }
}
