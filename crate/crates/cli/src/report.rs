use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use persuade_core::instance::PersuasivenessReport;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] persuade_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_NOT_PERSUASIVE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;
pub const EXIT_CAP: u8 = 5;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use persuade_core::Error as E;
        match self {
            CliError::Io { .. } | CliError::Usage(_) => EXIT_USAGE,
            CliError::Json { .. } => EXIT_VALIDATION,
            CliError::Core(e) => match e {
                E::Invalid(_)
                | E::Dimension(_)
                | E::IndexOutOfRange { .. }
                | E::Degenerate(_)
                | E::Unsupported(_) => EXIT_VALIDATION,
                E::Lp { .. } | E::RoundLimit { .. } => EXIT_SOLVER,
                E::CapExceeded(_) => EXIT_CAP,
            },
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_value(read_value(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_value(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    // every serialized type here is plain data with string keys
    serde_json::to_value(v).expect("report values serialize")
}

/// Common envelope of every JSON result.
#[derive(Debug, Serialize)]
pub struct Report {
    pub solver: &'static str,
    pub value: Option<f64>,
    pub scheme: Option<Value>,
    pub persuasiveness: Option<PersuasivenessReport>,
    pub wall_time_ms: f64,
    pub parameters: Map<String, Value>,
    pub seed: u64,
    pub extra: Map<String, Value>,
}

impl Report {
    pub fn new(solver: &'static str, seed: u64) -> Self {
        Report {
            solver,
            value: None,
            scheme: None,
            persuasiveness: None,
            wall_time_ms: 0.0,
            parameters: Map::new(),
            seed,
            extra: Map::new(),
        }
    }

    pub fn param(mut self, key: &str, v: impl Serialize) -> Self {
        self.parameters.insert(key.into(), to_value(&v));
        self
    }

    pub fn extra(mut self, key: &str, v: impl Serialize) -> Self {
        self.extra.insert(key.into(), to_value(&v));
        self
    }
}

/// What a subcommand prints, plus the exit code to finish with.
pub enum Output {
    Json(Value),
    Csv(String),
}

pub fn emit(out: &Output, path: Option<&Path>) -> CliResult<()> {
    let text = match out {
        Output::Json(v) => {
            let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
            s.push('\n');
            s
        }
        Output::Csv(s) => s.clone(),
    };
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = io::stdout().lock();
            // a closed pipe is not an error worth reporting
            let _ = stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush());
            Ok(())
        }
    }
}
