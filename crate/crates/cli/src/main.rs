use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use galerkin_gcn::Error;

mod config;
mod run;

#[derive(Parser)]
#[command(name = "galerkin-gcn", version, about = "Graph-convolutional Galerkin networks for steady PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List registered cases with their error targets
    List {
        /// Only cases whose name contains this text
        filter: Option<String>,
    },
    /// Train a forward problem
    Forward(RunArgs),
    /// Train an inverse problem (`--mode hard|soft`, default hard)
    Inverse(RunArgs),
    /// Solve with the classical Galerkin solver and export the fields
    Oracle(RunArgs),
    /// Train cases in all their modes and check the acceptance thresholds
    Verify(VerifyArgs),
    /// Shorthand: `run CASE forward|inverse|oracle|verify [flags]`
    Run {
        #[arg(value_name = "CASE")]
        name: String,
        action: Action,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Action {
    Forward,
    Inverse,
    Oracle,
    Verify,
}

#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// TOML run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Registered case; a unique prefix is enough
    #[arg(long)]
    pub case: Option<String>,
    /// forward, inverse-soft, inverse-hard (or soft, hard) or oracle
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training iterations
    #[arg(long)]
    pub iters: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Penalty weight of soft assimilation
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Initial learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Start from the network parameters in this checkpoint
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// No progress output
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Args, Clone, Debug, Default)]
pub struct VerifyArgs {
    /// Cases to verify (unique prefixes accepted)
    pub cases: Vec<String>,
    /// Verify every registered case
    #[arg(long)]
    pub all: bool,
    /// Cases trained concurrently
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Outcome that maps onto a process exit code.
pub enum Failure {
    Error(Error),
    Acceptance,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::List { filter } => {
            run::list(filter.as_deref());
            Ok(())
        }
        Command::Forward(args) => run::train(&args, run::Family::Forward),
        Command::Inverse(args) => run::train(&args, run::Family::Inverse),
        Command::Oracle(args) => run::oracle(&args),
        Command::Verify(args) => run::verify(&args),
        Command::Run { name, action, args } => with_case(name, args).and_then(|args| match action {
            Action::Forward => run::train(&args, run::Family::Forward),
            Action::Inverse => run::train(&args, run::Family::Inverse),
            Action::Oracle => run::oracle(&args),
            Action::Verify => run::verify(&VerifyArgs {
                cases: Vec::new(),
                all: false,
                jobs: 1,
                run: args,
            }),
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Acceptance) => {
            eprintln!("acceptance check failed");
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Diverged { .. } | Error::NonFinite(_) | Error::NotConverged { .. } => 2,
                _ => 1,
            })
        }
    }
}

fn with_case(case: String, mut args: RunArgs) -> Result<RunArgs, Failure> {
    if let Some(other) = &args.case {
        if *other != case {
            return Err(Error::Config(format!("case given twice: `{case}` and `{other}`")).into());
        }
    }
    args.case = Some(case);
    Ok(args)
}
