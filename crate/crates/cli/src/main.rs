mod commands;
mod error;
mod formats;

use std::io::Write;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use commands::{CollectArgs, ExtractArgs, FuseArgs, ReportArgs, SimulateArgs, TrainArgs};
use error::CliError;

/// Sample-level fusion of forecasting model zoos.
#[derive(Debug, Parser)]
#[command(name = "timefuse", version)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Print nothing but errors and warnings.
    #[arg(long, global = true)]
    quiet: bool,

    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "TIMEFUSE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the 24 meta-features of every window.
    Extract(ExtractArgs),
    /// Package windows, zoo forecasts and truths into a shard.
    Collect(CollectArgs),
    /// Train a fusor on one or more shards.
    Train(TrainArgs),
    /// Fuse zoo forecasts with a trained fusor.
    Fuse(FuseArgs),
    /// Compare the fusor with static ensembles on test shards.
    Report(ReportArgs),
    /// Write a seeded synthetic task in the collect input formats.
    Simulate(SimulateArgs),
}

/// Settings shared by every command.
pub struct Ctx {
    pub seed: u64,
    pub quiet: bool,
}

impl Ctx {
    pub fn say(&self, msg: impl AsRef<str>) {
        // a closed pipe (`| head`) is not worth failing over
        if !self.quiet {
            let _ = writeln!(std::io::stdout(), "{}", msg.as_ref());
        }
    }
}

/// How a successful command ended.
pub enum Status {
    Clean,
    /// Finished, but with warnings on stderr.
    Warnings,
}

fn run(cli: Cli) -> Result<Status, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Extract(a) => commands::extract(&ctx, a),
        Command::Collect(a) => commands::collect(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Fuse(a) => commands::fuse(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
    }
}

/// Usage of the subcommand named on the command line, else of the program.
fn usage_for_argv() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args()
        .skip(1)
        .find(|a| cmd.find_subcommand(a).is_some());
    match name {
        Some(n) => cmd.find_subcommand_mut(&n).expect("found above").render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for_argv());
            }
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Warnings) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
