// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bosonic_saddle_cli::commands::{cmd_amplitude, cmd_saddles, cmd_scan, Method};
use bosonic_saddle_cli::input::{parse_occupation, read_matrix, thread_limit, Fractions};
use bosonic_saddle_cli::sweep::{cmd_bench, cmd_error_sweep};
use bosonic_saddle_cli::{CliError, Outcome, EXIT_INPUT};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bosonic-saddle", version, about = "Exact and saddle-point boson transition amplitudes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One transition amplitude (or classical probability) as JSON.
    Amplitude {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long = "in")]
        input: String,
        #[arg(long = "out")]
        output: String,
        #[arg(long, value_enum, default_value = "exact")]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Every output configuration for one input, as CSV.
    Scan {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long = "in")]
        input: String,
        #[arg(long, value_enum, default_value = "exact")]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scan even when the output space is larger than 10^6.
        #[arg(long)]
        force: bool,
    },
    /// Relative error of the approximation along fixed fractions, as CSV.
    ErrorSweep {
        #[arg(long)]
        matrix: PathBuf,
        /// Input and output fractions, e.g. `1/2,1/2:1/2,1/2`.
        #[arg(long)]
        fractions: String,
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 100)]
        n_max: usize,
        #[arg(long, default_value_t = 1)]
        n_step: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fill the wall-time columns (output is then not reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Distinct saddle points of the scaling problem, as JSON.
    Saddles {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long = "in")]
        input: String,
        #[arg(long = "out")]
        output: String,
        #[arg(long, default_value_t = 1000)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact-engine timings on uniform occupations, as JSON.
    Bench {
        #[arg(long)]
        matrix: PathBuf,
        /// Comma-separated particle numbers.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    if let Some(k) = thread_limit()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Amplitude { matrix, input, output, method, seed } => {
            let u = read_matrix(&matrix)?;
            cmd_amplitude(&u, &parse_occupation(&input)?, &parse_occupation(&output)?, method, seed)
        }
        Command::Scan { matrix, input, method, seed, force } => {
            let u = read_matrix(&matrix)?;
            cmd_scan(&u, &parse_occupation(&input)?, method, seed, force)
        }
        Command::ErrorSweep { matrix, fractions, n_min, n_max, n_step, seed, timings } => {
            let u = read_matrix(&matrix)?;
            cmd_error_sweep(&u, &Fractions::parse(&fractions)?, n_min, n_max, n_step, seed, timings)
        }
        Command::Saddles { matrix, input, output, starts, seed } => {
            let u = read_matrix(&matrix)?;
            cmd_saddles(&u, &parse_occupation(&input)?, &parse_occupation(&output)?, starts, seed)
        }
        Command::Bench { matrix, n_list, repeats } => cmd_bench(&read_matrix(&matrix)?, &n_list, repeats),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.stdout.as_bytes());
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
