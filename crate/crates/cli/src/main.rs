use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use mixsvm_cli::{commands, config, Command};
use mixsvm_core::Execution;

/// Kernel SVM experiments on dependent data.
#[derive(Parser)]
#[command(name = "mixsvm", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a config value, e.g. `--set experiment.seeds=[1,2]`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Emit a sample path.
    Simulate,
    /// Mixing coefficients per lag of a Markov chain.
    Mixing,
    /// A single solve with its optimality report.
    Train,
    /// Validity verdict of the regularization schedule.
    Schedule,
    /// Consistency sweep: risk against n.
    Sweep,
    /// Stability inequality against a reference solution.
    Stability,
    /// Law-of-large-numbers diagnostics.
    Lln,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Mixing => Command::Mixing,
            Cmd::Train => Command::Train,
            Cmd::Schedule => Command::Schedule,
            Cmd::Sweep => Command::Sweep,
            Cmd::Stability => Command::Stability,
            Cmd::Lln => Command::Lln,
        }
    }
}

fn execute(cli: &Cli) -> Result<commands::Outcome> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("--config is required"))?;
    let resolved = config::load(path, &cli.set)?;
    let exec = match cli.jobs {
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    };
    let cmd = Command::from(cli.cmd);
    match cli.jobs {
        #[cfg(feature = "parallel")]
        Some(j) if j > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()?
            .install(|| commands::run(cmd, &resolved, &cli.out, exec)),
        Some(0) => anyhow::bail!("--jobs must be positive"),
        _ => commands::run(cmd, &resolved, &cli.out, exec),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome.to_json()).expect("json"));
            if outcome.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
