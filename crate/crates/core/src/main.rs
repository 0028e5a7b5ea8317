use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use rrcheck::cli::{run, Mode, ModelSource, RunConfig};
use rrcheck::explore::Caps;

/// Round-Robin bounded model checking with abstract convergence detection.
#[derive(Parser, Debug)]
#[command(name = "rrcheck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prove or refute the property for a fixed thread count.
    Verify(Common),
    /// Search the bounded grid for a violation, without convergence tests.
    Test(Common),
    /// Verify a built-in family for every thread count.
    VerifyUnbounded(Common),
    /// Frontier explorer against the naive and eager-closure baselines.
    Compare(Common),
    /// Exhaustive search under free scheduling.
    Oracle(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Built-in model name or path to a model file.
    model: String,
    /// Thread count for built-in models.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    abstraction: Option<String>,
    /// Property as `shared=<value>`: that shared value is an error.
    #[arg(long)]
    error: Option<String>,
    #[arg(long)]
    max_r: Option<u32>,
    #[arg(long)]
    max_d: Option<u32>,
    #[arg(long, default_value_t = 6)]
    max_n: usize,
    #[arg(long)]
    max_states: Option<usize>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, c) = match cli.command {
        Command::Verify(c) => (Mode::Verify, c),
        Command::Test(c) => (Mode::Test, c),
        Command::VerifyUnbounded(c) => (Mode::VerifyUnbounded, c),
        Command::Compare(c) => (Mode::Compare, c),
        Command::Oracle(c) => (Mode::Oracle, c),
    };
    let cfg = RunConfig {
        source: ModelSource::resolve(&c.model),
        mode,
        n: c.n,
        abstraction: c.abstraction,
        error: c.error,
        caps: Caps {
            max_r: c.max_r,
            max_d: c.max_d,
            max_states: c.max_states,
            timeout: c.timeout_ms.map(Duration::from_millis),
        },
        max_n: c.max_n,
        out: c.out,
    };
    match run(&cfg) {
        Ok(report) => {
            println!("{}", report.to_json());
            ExitCode::from(report.result.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
