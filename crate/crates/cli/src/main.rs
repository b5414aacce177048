use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unroll_cli::commands::{cmd_bound, cmd_datagen, cmd_experiment, cmd_train, cmd_verify};
use unroll_cli::{resolve_config, GlobalOptions};

#[derive(Parser)]
#[command(name = "unroll", version, about = "Train unrolled thresholding networks and evaluate their generalization bounds")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON config file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the full experiment sizes (m_train 10000, m_test 50000, N 120).
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Worker threads for `experiment`.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network and write its parameters and loss history.
    Train,
    /// Evaluate the generalization bound and print every constant.
    Bound {
        /// Parameter snapshot written by `train`.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run every grid point and repeat, writing results and summary CSVs.
    Experiment,
    /// Run the gradient, output-bound, perturbation-bound and Ψ audits.
    Verify,
    /// Write a synthetic dataset and its spec.
    Datagen,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = GlobalOptions {
        config: cli.global.config,
        seed: cli.global.seed,
        out: cli.global.out,
        paper_scale: cli.global.paper_scale,
        threads: cli.global.threads,
    };
    let result = resolve_config(&opts).and_then(|cfg| match &cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Bound { params } => cmd_bound(&cfg, params.as_deref()),
        Command::Experiment => cmd_experiment(&cfg, opts.threads),
        Command::Verify => cmd_verify(&cfg),
        Command::Datagen => cmd_datagen(&cfg),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
