//! `potconv` — train, evaluate, verify, and visualize potential-convolution
//! point-cloud models.
//!
//! Exit codes: 0 success, 1 check failure or runtime error, 2 configuration
//! error, 3 numeric failure (NaN/Inf). Logs go to stderr; data only to files.

mod commands;
mod data;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "potconv",
    version,
    about = "Point convolution with learnable potential fields",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic shape dataset as XYZ files with a manifest.
    GenData(commands::gen_data::Args),
    /// Train a model and write a checkpoint plus a metrics CSV.
    Train(commands::train::Args),
    /// Evaluate a checkpoint on a dataset.
    Eval(commands::eval::Args),
    /// Verify analytic gradients against central finite differences.
    Gradcheck(commands::gradcheck::Args),
    /// Evaluate trained checkpoints on sparser and sparser test clouds.
    SparseSweep(commands::sweep::Args),
    /// Export potential-field visualizations as colored PLY point sets.
    VizFields(commands::viz::Args),
}

/// A command outcome carrying the process exit code.
pub(crate) struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<potconv::Error> for Failure {
    fn from(e: potconv::Error) -> Self {
        use potconv::Error;
        let code = match &e {
            Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::VersionMismatch { .. }
            | Error::MissingKey(_)
            | Error::CorruptCheckpoint(_) => 2,
            Error::Numeric(_) => 3,
            Error::Structural(_) | Error::Io(_) => 1,
        };
        Self { code, message: e.to_string() }
    }
}

pub(crate) type CmdResult = Result<(), Failure>;

/// Worker-thread cap from `PFCV_THREADS`, defaulting to the machine's
/// available parallelism.
pub(crate) fn worker_threads() -> usize {
    std::env::var("PFCV_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(args) => commands::gen_data::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
        Command::SparseSweep(args) => commands::sweep::run(args),
        Command::VizFields(args) => commands::viz::run(args),
    };
    if let Err(failure) = result {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
