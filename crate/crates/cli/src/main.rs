//! `minimax`: regret scans, Shtarkov constants, strategy comparisons and an
//! arithmetic-coding compressor over Bayes-mixture strategies.

mod commands;
mod config;
mod container;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Failures the CLI raises itself; core errors are classified in [`exit_code`].
#[derive(Debug)]
pub enum Fail {
    Usage(String),
    Data(String),
    Io(String),
}

impl std::fmt::Display for Fail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Fail::Usage(m) | Fail::Data(m) | Fail::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Fail {}

pub const EXIT_GUARD: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;
pub const EXIT_NOINPUT: u8 = 66;

#[derive(Parser, Debug)]
#[command(name = "minimax", version, about = "Minimax-regret mixture codes: regret tables and compression")]
struct Cli {
    /// Worker threads for class sweeps.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=1024))]
    threads: u32,
    /// Seed for Monte Carlo steps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Worst-case regret per (n, strategy) as CSV.
    RegretScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Log Shtarkov constant per n, in nats and bits.
    Nml {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Strategies side by side against the Shtarkov constant.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode a file of symbols with the first configured strategy.
    Compress {
        #[arg(long)]
        config: PathBuf,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert `compress`.
    Decompress {
        #[arg(long)]
        config: PathBuf,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Critical radius, negative empirical Fisher values and a tied MLE for the contaminated Gaussian.
    DemoContaminated {
        /// Variance ratio of the wide component; defaults to e^5.
        #[arg(long)]
        s2: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        nu: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalizer of the ideal prior relative to the Jeffreys integral.
    DemoIdealPrior {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use minimax_core::Error as E;
    if let Some(f) = err.downcast_ref::<Fail>() {
        return match f {
            Fail::Usage(_) => EXIT_USAGE,
            Fail::Data(_) => EXIT_DATA,
            Fail::Io(_) => EXIT_NOINPUT,
        };
    }
    match err.downcast_ref::<E>() {
        Some(E::GuardExceeded { .. }) => EXIT_GUARD,
        Some(E::Config(_) | E::Domain(_) | E::Unsupported(_)) => EXIT_USAGE,
        Some(E::Truncated { .. } | E::Alphabet(_)) => EXIT_DATA,
        _ => 1,
    }
}

/// Write to `--out` or stdout.
pub fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Fail::Io(format!("cannot write {}: {e}", p.display())))?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = cli.threads as usize;
    match cli.cmd {
        Cmd::RegretScan { config, out } => commands::regret_scan(&config, out, threads),
        Cmd::Nml { config, out } => commands::nml(&config, out, threads),
        Cmd::Compare { config, out } => commands::compare(&config, out, threads, cli.seed),
        Cmd::Compress { config, input, out } => commands::compress(&config, &input, &out),
        Cmd::Decompress { config, input, out } => commands::decompress(&config, &input, &out),
        Cmd::DemoContaminated { s2, nu, out } => commands::demo_contaminated(s2.unwrap_or(5f64.exp()), nu, out),
        Cmd::DemoIdealPrior { config, out } => commands::demo_ideal_prior(config.as_deref(), out, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
