//! Experiment runner for the `superamp` simulator.
//!
//! Subcommands `run`, `verify`, `expand` and `sweep` share one flag set. A JSON
//! config file (`--config`) supplies defaults and flags override it. Exit
//! codes: 0 success, 2 bad config, 3 verification failure, 4 I/O error.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Algo, Base, ExperimentConfig, Format};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "superamp", about = "Amplitude amplification experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the selected algorithm and write its trace and summary.
    Run(Flags),
    /// Run the dense identity suite.
    Verify(Flags),
    /// Flatten a recursion into a gate list with its query ledger.
    Expand(Flags),
    /// One summary row per N for the superlinear and Grover runs.
    Sweep(Flags),
}

#[derive(Debug, Args, Default)]
pub struct Flags {
    /// JSON config file; other flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    #[arg(long)]
    pub n_qubits: Option<u32>,
    /// Dimension N (a power of two).
    #[arg(long)]
    pub n: Option<usize>,
    /// Source index (default 0).
    #[arg(long)]
    pub source: Option<usize>,
    /// Target index (default N-1).
    #[arg(long)]
    pub target: Option<usize>,
    /// Superlinear recursion depth.
    #[arg(long)]
    pub depth: Option<u32>,
    /// Standard amplification rounds.
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long, value_enum)]
    pub base: Option<Base>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub stride: Option<u64>,
    #[arg(long)]
    pub max_qubits: Option<u32>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Dense sizes for `verify`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Dimensions for `sweep`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
}

impl Flags {
    /// File values (if any) overlaid with the flags that were given.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f.clone(); } )* };
        }
        set!(algo, seed, format, stride, max_qubits);
        set_opt!(n_qubits, n, source, target, depth, p, iterations, base, out, dt, t_max, sizes, n_list);
        Ok(c)
    }
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(f) => commands::execute(&f.resolve()?),
        Command::Verify(f) => {
            let mut c = f.resolve()?;
            c.algo = Algo::Verify;
            commands::cmd_verify(&c)
        }
        Command::Expand(f) => {
            let mut c = f.resolve()?;
            c.algo = Algo::Expand;
            commands::cmd_expand(&c)
        }
        Command::Sweep(f) => commands::cmd_sweep(&f.resolve()?),
    }
}

/// Parses `args`, runs, and returns the process exit code. Failures print a
/// single line to stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return 2;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("superamp: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}
