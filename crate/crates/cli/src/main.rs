//! `oca`: analyze CA local rules and the S-boxes built from orthogonal
//! pairs of them, run the exhaustive per-diameter searches, and classify
//! linear S-boxes by the generator polynomial of their linear components.

mod commands;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

/// Exit codes: 0 success, 1 usage error, 2 domain error, 3 property
/// violation found, 4 interrupted with checkpoint.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Finding(String),
    Interrupted(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Finding(_) => 3,
            CliError::Interrupted(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Finding(m)
            | CliError::Interrupted(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser)]
#[command(
    name = "oca",
    version,
    about = "S-boxes from orthogonal cellular automata",
    long_about = "Builds S-boxes by superposing pairs of bipermutive CA local rules, \
measures their cryptographic properties, enumerates all pairs per diameter, and \
classifies linear S-boxes by the generator polynomial of their linear components space."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect one local rule: truth table, ANF, degree, balancedness,
    /// nonlinearity and bipermutivity
    RuleInfo {
        /// Wolfram number, decimal, arbitrary precision
        #[arg(long, value_name = "DEC")]
        wolfram: Option<String>,
        /// Truth table as lowercase hex (canonical above diameter 5)
        #[arg(long, value_name = "HEX")]
        tt: Option<String>,
        /// Rule diameter; inferred from --tt when omitted
        #[arg(short, long)]
        diameter: Option<usize>,
    },
    /// Analyze one rule pair: orthogonality, superposition S-box, metrics
    /// and linear components
    Analyze {
        /// First rule: decimal Wolfram number, or tt:HEX for a truth table
        f: String,
        /// Second rule, same forms
        g: String,
        #[arg(short, long)]
        diameter: usize,
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Enumerate all rule pairs of a diameter and report orthogonal ones
    Search {
        #[arg(short, long)]
        diameter: usize,
        /// Worker threads (defaults to the available parallelism)
        #[arg(long)]
        jobs: Option<usize>,
        /// Report file; without --format writes PATH.json, PATH.csv and
        /// PATH.classes.csv
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        format: Option<Format>,
        /// Test orthogonality on every pair instead of rejecting pairs
        /// that are not pairwise balanced first
        #[arg(long)]
        no_pb_filter: bool,
        /// Also scan rules of algebraic degree at most 1
        #[arg(long)]
        include_linear_rules: bool,
        /// Count ordered pairs (the default)
        #[arg(long, conflicts_with = "swap_reduced")]
        ordered: bool,
        /// Count each unordered pair once (right index >= left index)
        #[arg(long)]
        swap_reduced: bool,
        /// Acknowledge the multi-hour full run at diameter 6
        #[arg(long)]
        confirm_long_run: bool,
        /// Checkpoint file: created if absent, resumed if present
        #[arg(long, value_name = "CHECKPOINT")]
        resume: Option<PathBuf>,
        /// Left-rule index range START..END for a partial run
        #[arg(long, value_name = "START..END")]
        partition: Option<String>,
    },
    /// Classify linear S-boxes by LCS generator polynomial
    Classify {
        /// Diameter to search (ignored with --input)
        #[arg(short, long)]
        diameter: Option<usize>,
        /// Reuse a search report instead of running the search
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        confirm_long_run: bool,
    },
    /// Check the structural properties of every linear S-box of a diameter:
    /// support spread, shift closure and polynomial-code extraction
    Verify {
        #[arg(short, long)]
        diameter: usize,
        #[arg(long)]
        confirm_long_run: bool,
    },
}

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

extern "C" fn on_sigint(_: libc::c_int) {
    INTERRUPTED.store(true, Ordering::SeqCst);
}

fn install_sigint_handler() {
    let handler: extern "C" fn(libc::c_int) = on_sigint;
    unsafe {
        libc::signal(libc::SIGINT, handler as usize);
    }
}

pub fn interrupt_flag() -> &'static AtomicBool {
    &INTERRUPTED
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    install_sigint_handler();
    let result = match cli.command {
        Command::RuleInfo { wolfram, tt, diameter } => commands::rule_info(wolfram, tt, diameter),
        Command::Analyze {
            f,
            g,
            diameter,
            format,
            output,
        } => commands::analyze(&f, &g, diameter, format, output),
        Command::Search {
            diameter,
            jobs,
            output,
            format,
            no_pb_filter,
            include_linear_rules,
            ordered: _,
            swap_reduced,
            confirm_long_run,
            resume,
            partition,
        } => commands::search(commands::SearchArgs {
            diameter,
            jobs,
            output,
            format,
            no_pb_filter,
            include_linear_rules,
            swap_reduced,
            confirm_long_run,
            resume,
            partition,
        }),
        Command::Classify {
            diameter,
            input,
            jobs,
            output,
            format,
            confirm_long_run,
        } => commands::classify(diameter, input, jobs, output, format, confirm_long_run),
        Command::Verify {
            diameter,
            confirm_long_run,
        } => commands::verify(diameter, confirm_long_run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
