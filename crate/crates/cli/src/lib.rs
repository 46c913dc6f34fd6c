//! Command-line front end for dataset generation, training, evaluation and
//! the sweeps.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use mext_core::harness::SweepKind;
use mext_core::{GeometryKind, Profile};

pub mod commands;
pub mod config;

use commands::Split;
use config::{CliConfig, Overrides};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<mext_core::Error> for CliError {
    fn from(e: mext_core::Error) -> Self {
        use mext_core::Error as E;
        let code = match &e {
            E::InvalidArgument(_) | E::Config(_) | E::InvalidState(_) => EXIT_CONFIG,
            E::Format(_) | E::Io(_) | E::Json(_) | E::Csv(_) => EXIT_IO,
            E::NonFinite(_) => EXIT_NUMERIC,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mext", version, about = "Learned antenna selection and downlink channel extrapolation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed [default: 0].
    #[arg(long, global = true, env = "MEXT_SEED", value_name = "U64")]
    pub seed: Option<u64>,
    /// Output path.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Number of generated samples [default: 20000].
    #[arg(long, global = true, value_name = "U64")]
    pub num_samples: Option<usize>,
    /// Compression ratio M/N [default: 0.125].
    #[arg(long, global = true, value_name = "R")]
    pub ratio: Option<f64>,
    /// Array geometry [default: nula; sweeps default to their own set].
    #[arg(long, global = true, value_parser = parse_geometry)]
    pub geometry: Option<GeometryKind>,
    /// Network size and training budget [default: desk].
    #[arg(long, global = true, value_parser = parse_profile)]
    pub profile: Option<Profile>,
    /// Worker threads for sweeps [default: 1].
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

fn parse_geometry(s: &str) -> Result<GeometryKind, String> {
    s.parse().map_err(|e: mext_core::Error| e.to_string())
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: mext_core::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    /// Compression ratio r.
    R,
    /// Downlink subcarrier (frequency gap).
    Gap,
    /// Uplink estimation noise variance.
    Noise,
}

impl From<SweepArg> for SweepKind {
    fn from(a: SweepArg) -> Self {
        match a {
            SweepArg::R => SweepKind::CompressionRatio,
            SweepArg::Gap => SweepKind::FrequencyGap,
            SweepArg::Noise => SweepKind::UplinkNoise,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a paired uplink/downlink dataset [--out default: dataset.bin].
    GenData,
    /// Train selection and network on a dataset [--out default: model.json].
    Train {
        /// Dataset written by gen-data.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
    /// Evaluate a model on a dataset split; prints the MSE.
    Eval {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
    },
    /// Run a sweep and write a results CSV [--out default: sweep_<kind>.csv].
    Sweep {
        #[arg(value_enum)]
        kind: SweepArg,
        /// Comma-separated sweep values (ratios, downlink Hz, or variances).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Print the resolved configuration as JSON.
    PrintConfig,
}

fn resolve(common: &Common) -> Result<CliConfig, CliError> {
    let flags = Overrides {
        profile: common.profile,
        seed: common.seed,
        num_samples: common.num_samples,
        ratio: common.ratio,
        geometry: common.geometry,
        jobs: common.jobs,
    };
    config::resolve(common.config.as_deref(), &flags)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = resolve(&cli.common)?;
    let out = |default: &str| cli.common.out.clone().unwrap_or_else(|| PathBuf::from(default));
    match cli.command {
        Command::GenData => commands::cmd_gen_data(&cfg, &out("dataset.bin")),
        Command::Train { data } => commands::cmd_train(&cfg, &data, &out("model.json")).map(drop),
        Command::Eval { model, data, split } => {
            commands::cmd_eval(&model, &data, split, cli.common.out.as_deref()).map(drop)
        }
        Command::Sweep { kind, values } => {
            if values.is_some() {
                cfg.sweep.values = values;
            }
            let kind = SweepKind::from(kind);
            commands::cmd_sweep(&cfg, kind, &out(&format!("sweep_{}.csv", kind.as_str()))).map(drop)
        }
        Command::PrintConfig => {
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            Ok(())
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let command = Cli::command().after_long_help(config::defaults_help());
    let cli = match command.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
