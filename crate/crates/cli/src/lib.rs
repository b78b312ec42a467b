//! Command-line front end: config files in, records, tables and plots out.
//!
//! Exit codes: 0 success, 2 config or usage error, 3 I/O error, 4 malformed
//! record, 5 analysis failure (including a failed brute-force check).

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "hetsense", version, about = "Heterodyne spin-sensing simulator")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a shot series and write the record.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Correlate a record, take its spectrum and fit the peaks.
    Analyze {
        /// Record written by `simulate` (binary, or CSV by extension).
        record: PathBuf,
        /// Config whose [analysis] block is used; defaults apply without it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Correlation lengths (lags) for a linewidth table.
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
        /// Recompute the correlation by the direct double sum and fail on disagreement.
        #[arg(long)]
        oracle_brute_force: bool,
    },
    /// Run an ODMR, Rabi or phase-sweep scan.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the pulse timeline and derived quantities.
    Describe {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the Floquet sidebands of the config's RF drive.
    Sidebands {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_order: i32,
    },
}

fn run_command(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Simulate { config, seed } => {
            let cfg = RunConfig::load(config)?;
            Ok(commands::simulate(&cfg, *seed, &cli.out_dir, cli.svg)?.text())
        }
        Command::Analyze { record, config, lengths, oracle_brute_force } => {
            let analysis = match config {
                Some(path) => RunConfig::load(path)?.analysis,
                None => Default::default(),
            };
            let rec = commands::read_record(record)?;
            let report = commands::analyze_record(&rec, &analysis, lengths.as_deref(), *oracle_brute_force)?;
            let files = commands::write_analysis(&report, &cli.out_dir, cli.svg)?;
            Ok(report.text() + &format!("wrote {} files to {}\n", files.len(), cli.out_dir.display()))
        }
        Command::Scan { config, seed } => {
            let cfg = RunConfig::load(config)?;
            let report = commands::run_scan(&cfg, *seed)?;
            let files = commands::write_scan(&report, &cli.out_dir, cli.svg)?;
            Ok(report.text() + &format!("wrote {} files to {}\n", files.len(), cli.out_dir.display()))
        }
        Command::Describe { config } => commands::describe(&RunConfig::load(config)?),
        Command::Sidebands { config, max_order } => {
            if *max_order < 0 {
                return Err(CliError::Usage("--max-order must be ≥ 0".into()));
            }
            let table = commands::sideband_table(&RunConfig::load(config)?, *max_order)?;
            commands::write_sidebands(&table, &cli.out_dir)?;
            Ok(table.text())
        }
    }
}

/// Runs the parsed command on a pool of `--threads` workers.
pub fn run(cli: &Cli) -> CliResult<String> {
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_command(cli))
}

/// Parses `args`, runs, prints, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
