use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hemisel_cli::{resolve, run, Command, Overrides};

#[derive(Parser)]
#[command(name = "hemisel", version, about = "Endogenous-selection estimation and survey imputation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a data set from a selection model.
    Simulate {
        /// Append latent columns and the full outcome.
        #[arg(long)]
        keep_latents: bool,
    },
    /// Run one estimator on a data set.
    Estimate,
    /// Multiple imputation and a Gini interval.
    Impute,
    /// Coverage study: simulate, sample, impute, repeat.
    Experiment,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, keep_latents) = match cli.command {
        Cmd::Simulate { keep_latents } => (Command::Simulate, keep_latents),
        Cmd::Estimate => (Command::Estimate, false),
        Cmd::Impute => (Command::Impute, false),
        Cmd::Experiment => (Command::Experiment, false),
    };
    let flags = Overrides { out: cli.out, seed: cli.seed, threads: cli.threads, keep_latents };
    let result = resolve(cli.config.as_deref(), &flags).and_then(|cfg| run(command, &cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
