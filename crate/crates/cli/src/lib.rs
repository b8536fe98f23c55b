//! `epmdp`: experiments on Ewens–Pitman partitions from the command line.
//!
//! Every subcommand produces a table written as CSV (default) or JSON, plus
//! a run manifest. With `--out PATH` the manifest goes to
//! `PATH.manifest.json`; otherwise the table goes to stdout and the
//! manifest to stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, ValueEnum};
use serde::Serialize;
use thiserror::Error;

pub mod commands;
pub mod manifest;
pub mod parse;
pub mod table;

use manifest::{sha256_hex, OutputDigest, RunManifest};
use table::Table;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] ewens_pitman::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Table(#[from] table::TableError),
    #[error("verification report flagged: {0}")]
    Flagged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Core(e) if e.is_numeric() => 2,
            CliError::Core(_) => 1,
            CliError::Io { .. } | CliError::Table(_) => 2,
            CliError::Flagged(_) => 3,
        }
    }
}

impl From<parse::ParseError> for CliError {
    fn from(e: parse::ParseError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Output and execution flags shared by all subcommands.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Data file to write; a `.manifest.json` sidecar is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv", global = true)]
    pub format: Format,
    /// Worker threads for replicate loops. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "epmdp", version, about = "Ewens-Pitman partitions: sampling, exact laws, posterior moments and moderate deviations")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: commands::Command,
}

/// What a subcommand hands back for emission.
pub enum Output {
    Table(Table),
    /// A single number, printed bare when no `--out` is given.
    Scalar { table: Table, value: f64 },
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let Cli { common, command } = cli;
    let mut manifest = RunManifest::start(command.name(), command.parameters(), command.seed(), common.workers);
    let result = match common.workers {
        Some(0) => return Err(CliError::Validation("--workers must be positive".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Validation(format!("cannot start {w} workers: {e}")))?
            .install(|| command.execute()),
        None => command.execute(),
    };
    let (output, flag) = match result {
        Ok(o) => (o, None),
        Err(commands::Failure::Flagged(o, why)) => (o, Some(why)),
        Err(commands::Failure::Error(e)) => return Err(e),
    };
    emit(&common, &mut manifest, output)?;
    match flag {
        Some(why) => Err(CliError::Flagged(why)),
        None => Ok(()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Sidecar location for a data file.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn emit(common: &Common, manifest: &mut RunManifest, output: Output) -> Result<(), CliError> {
    let (table, scalar) = match output {
        Output::Table(t) => (t, None),
        Output::Scalar { table, value } => (table, Some(value)),
    };
    let data = match common.format {
        Format::Csv => table.to_csv()?,
        Format::Json => table.to_json(&manifest.deterministic()),
    };
    match &common.out {
        Some(path) => {
            write_file(path, data.as_bytes())?;
            manifest.finish(vec![OutputDigest {
                path: path.display().to_string(),
                sha256: sha256_hex(data.as_bytes()),
            }]);
            let text = serde_json::to_string_pretty(manifest).expect("serializable") + "\n";
            write_file(&manifest_path(path), text.as_bytes())?;
        }
        None => {
            match scalar {
                Some(v) => println!("{v:?}"),
                None => print!("{data}"),
            }
            manifest.finish(Vec::new());
            eprintln!("{}", serde_json::to_string(manifest).expect("serializable"));
        }
    }
    Ok(())
}
