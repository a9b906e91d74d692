//! `surat` command-line driver.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

pub mod commands;
pub mod config;
pub mod metrics_log;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] surat_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "surat", version, about = "Spam/ham email classification pipeline")]
pub struct Cli {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for splitting, initialization and shuffling
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Run batch work on one thread
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean the dataset, split it and write vocabularies
    Prepare {
        /// Dataset CSV with message and label columns
        #[arg(long, value_name = "CSV")]
        data: Option<PathBuf>,
    },
    /// Train one model on the prepared train split
    Train {
        #[arg(long, value_parser = parse_kind)]
        model: surat_core::pipeline::ModelKind,
        /// Hold out this stratified fraction of the train split and report
        /// validation metrics on it; the model is fit on the remainder
        #[arg(long, value_name = "FRACTION")]
        validation_fraction: Option<f64>,
    },
    /// Score a model on the prepared test split
    Evaluate(ModelRef),
    /// Evaluate several models and print a comparison table
    Compare {
        #[arg(long = "model", value_parser = parse_kind)]
        models: Vec<surat_core::pipeline::ModelKind>,
        #[arg(long = "artifact", value_name = "FILE")]
        artifacts: Vec<PathBuf>,
    },
    /// Classify one raw message
    Predict {
        #[command(flatten)]
        target: ModelRef,
        #[arg(long)]
        text: String,
        /// Print a JSON object instead of text
        #[arg(long)]
        json: bool,
    },
    /// Write the synthetic two-lexicon corpus as CSV
    Synth {
        #[arg(long, default_value_t = 200)]
        n_per_class: usize,
        #[arg(long, default_value_t = 0.2)]
        overlap: f64,
        /// Destination CSV; defaults to <out>/synthetic.csv
        #[arg(long, value_name = "CSV")]
        output: Option<PathBuf>,
    },
    /// Print the resolved configuration as TOML
    Config,
}

/// Either a model kind (resolved to `<out>/models/<kind>.model`) or an
/// explicit artifact path.
#[derive(Debug, Clone, Args)]
pub struct ModelRef {
    #[arg(long, value_parser = parse_kind, required_unless_present = "artifact")]
    pub model: Option<surat_core::pipeline::ModelKind>,
    #[arg(long, value_name = "FILE", conflicts_with = "model")]
    pub artifact: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<surat_core::pipeline::ModelKind, String> {
    s.parse().map_err(|e: surat_core::Error| e.to_string())
}

/// Parse arguments and run. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Data("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(surat_core::Error::Numeric("nan".into())).exit_code(), 3);
        assert_eq!(CliError::Core(surat_core::Error::SingleClass).exit_code(), 2);
    }

    #[test]
    fn unknown_model_is_usage_error() {
        assert_eq!(main_with_args(["surat", "train", "--model", "forest"]), 1);
    }

    #[test]
    fn compare_parses_repeated_models() {
        let cli = Cli::try_parse_from(["surat", "compare", "--model", "svm", "--model", "lstm"]).unwrap();
        match cli.command {
            Command::Compare { models, .. } => assert_eq!(models.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
