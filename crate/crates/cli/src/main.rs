//! `oneshot`: batch runner for the dequantizing, coding and rate experiments.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use report::CliError;

#[derive(Parser)]
#[command(name = "oneshot", version, about = "One-shot coding experiments for classical-quantum channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LhsMode {
    Exhaustive,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum EntropyKind {
    Hmin,
    Hmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum Search {
    Exhaustive,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Permutation-averaged distance from classicality against its bound.
    Dequantize {
        /// Channel JSON; must describe a map complementary to a CQ channel.
        #[arg(long)]
        channel: PathBuf,
        /// Pure state JSON in its Schmidt basis.
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value = "exhaustive")]
        mode: LhsMode,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long = "eps-prime", default_value_t = 0.0)]
        eps_prime: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conditional min- or max-entropy of a state with its certificate.
    Entropy {
        /// Operator JSON (density matrix with dims) or pure state JSON.
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value = "hmin")]
        kind: EntropyKind,
        /// Subsystems of A, comma separated.
        #[arg(long, default_value = "0", value_delimiter = ',')]
        a: Vec<usize>,
        /// Conditioning subsystems, comma separated; empty for none.
        #[arg(long, default_value = "1", value_delimiter = ',')]
        b: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Permutation code with an Uhlmann decoder: error probability and bound.
    CodeSim {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        messages: usize,
        /// `uniform` or a path to a distribution JSON.
        #[arg(long, default_value = "uniform")]
        dist: String,
        #[arg(long, value_enum, default_value = "exhaustive")]
        search: Search,
        #[arg(long, default_value_t = 64)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-n achievable rates for an ensemble, as CSV.
    HswRate {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long = "n-max", default_value_t = 4)]
        n_max: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 0.3)]
        pe: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every theorem check and print one line per criterion.
    VerifyAll {
        /// Reduced instance counts.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Dequantize { channel, state, mode, samples, eps, eps_prime, seed, out } => {
            let mode = match mode {
                LhsMode::Exhaustive => commands::LhsChoice::Exhaustive,
                LhsMode::Mc => commands::LhsChoice::MonteCarlo { samples, seed },
            };
            commands::dequantize(&channel, &state, mode, eps, eps_prime, out.as_deref())
        }
        Command::Entropy { state, kind, a, b, eps, out } => {
            let b = commands::parse_subsystems(&b)?;
            commands::entropy(&state, matches!(kind, EntropyKind::Hmax), a, b, eps, out.as_deref())
        }
        Command::CodeSim { channel, messages, dist, search, budget, seed, eps, out } => {
            let search = match search {
                Search::Exhaustive => oneshot_core::coding::SearchMode::Exhaustive,
                Search::Random => oneshot_core::coding::SearchMode::Random { seed, budget },
            };
            commands::code_sim(&channel, messages, &dist, search, eps, out.as_deref())
        }
        Command::HswRate { ensemble, n_max, eps, pe, out } => {
            commands::hsw_rate(&ensemble, n_max, eps, pe, out.as_deref())
        }
        Command::VerifyAll { quick, seed, out } => commands::verify_all(quick, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
