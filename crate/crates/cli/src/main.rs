mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "grasshopper",
    version,
    about = "Optimal lawn shapes for the spherical grasshopper problem"
)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Fibonacci-antipodal grid file.
    Gridgen {
        /// Number of antipodal pairs (N = 2 * pairs).
        #[arg(long)]
        pairs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Anneal one jump angle and save the best lawn(s).
    Optimize(RunArgs),
    /// Anneal a list of jump angles and write the probability curve.
    Sweep(RunArgs),
    /// Evaluate a saved lawn file.
    Eval(LawnArgs),
    /// Count cogs and check the reflection identity of a saved lawn file.
    Analyze(LawnArgs),
}

#[derive(Args, Clone, Default)]
pub struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid file.
    #[arg(long, conflicts_with = "pairs")]
    grid: Option<PathBuf>,
    /// Generate a Fibonacci-antipodal grid with this many pairs.
    #[arg(long)]
    pairs: Option<usize>,
    /// one, two (sweep also accepts both).
    #[arg(long)]
    setup: Option<String>,
    /// Jump angle, e.g. 0.94, pi/5, 0.3pi.
    #[arg(long)]
    theta: Option<String>,
    /// Comma-separated jump angles for sweep.
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    t_initial: Option<f64>,
    #[arg(long)]
    t_final_ratio: Option<f64>,
    #[arg(long)]
    cooling_ratio: Option<f64>,
    #[arg(long)]
    sweeps: Option<usize>,
    /// Directory for cached interaction tables.
    #[arg(long)]
    table_cache: Option<PathBuf>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stop every replica after this many temperature stages, leaving
    /// checkpoints behind.
    #[arg(long, hide = true)]
    halt_after_stages: Option<usize>,
}

#[derive(Args)]
pub struct LawnArgs {
    /// Lawn JSON file.
    lawn: PathBuf,
    #[arg(long, conflicts_with = "pairs")]
    grid: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<usize>,
    /// Evaluate at this angle instead of the one stored in the file.
    #[arg(long)]
    theta: Option<String>,
}

/// A failed command: message and process exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<grasshopper_core::Error> for Failure {
    fn from(e: grasshopper_core::Error) -> Self {
        let code = if e.is_invalid_input() { 2 } else { 1 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    let result = pool.install(|| match cli.command {
        Command::Gridgen { pairs, out } => commands::gridgen(pairs, &out),
        Command::Optimize(args) => commands::optimize(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Analyze(args) => commands::analyze(&args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
