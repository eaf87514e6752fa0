//! Command-line surface: argument parsing, config-file merging, and report
//! generation for every experiment and verifier.

mod args;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

pub use args::*;
pub use run::{execute, Execution};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error("cannot read config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("config does not match the {command} schema: {message}")]
    Schema { command: String, message: String },
}

/// A parsed and fully resolved invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliConfig {
    pub command: Command,
    pub config_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl CliConfig {
    /// Space-separated subcommand path, e.g. `verify residue-map`.
    pub fn command_name(&self) -> String {
        let v = serde_json::to_value(&self.command).expect("commands serialize");
        let mut parts = Vec::new();
        let mut cur = &v;
        while let Some(name) = cur.get("name").and_then(Value::as_str) {
            parts.push(name.to_string());
            cur = &cur["args"];
        }
        parts.join(" ")
    }
}

/// Fields missing from `flags` are taken from `file`; unknown keys fail.
fn merge<T: Serialize + DeserializeOwned>(command: &str, flags: &T, file: &Map<String, Value>) -> Result<T, CliError> {
    let mut merged = file.clone();
    if let Value::Object(given) = serde_json::to_value(flags).expect("args serialize") {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Schema {
        command: command.to_string(),
        message: e.to_string(),
    })
}

fn load_config(path: &PathBuf) -> Result<Map<String, Value>, CliError> {
    let err = |message: String| CliError::Config {
        path: path.clone(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    match serde_json::from_str(&text).map_err(|e| err(e.to_string()))? {
        Value::Object(m) => Ok(m),
        _ => Err(err("top level must be a JSON object".into())),
    }
}

pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => Map::new(),
    };
    let command = match &cli.command {
        Command::Findprime(a) => Command::Findprime(merge("findprime", a, &file)?),
        Command::Nmext(a) => Command::Nmext(merge("nmext", a, &file)?),
        Command::Dlog(a) => Command::Dlog(merge("dlog", a, &file)?),
        Command::Mac(a) => Command::Mac(merge("mac", a, &file)?),
        Command::Params(a) => Command::Params(merge("params", a, &file)?),
        Command::Protocol(ProtocolCmd::Run(a)) => Command::Protocol(ProtocolCmd::Run(merge("protocol run", a, &file)?)),
        Command::Verify(v) => Command::Verify(match v {
            VerifyCmd::Charsum(a) => VerifyCmd::Charsum(merge("verify charsum", a, &file)?),
            VerifyCmd::Weil(a) => VerifyCmd::Weil(merge("verify weil", a, &file)?),
            VerifyCmd::Nm(a) => VerifyCmd::Nm(merge("verify nm", a, &file)?),
            VerifyCmd::Xor(a) => VerifyCmd::Xor(merge("verify xor", a, &file)?),
            VerifyCmd::ResidueMap(a) => VerifyCmd::ResidueMap(merge("verify residue-map", a, &file)?),
            VerifyCmd::L1norm(a) => VerifyCmd::L1norm(merge("verify l1norm", a, &file)?),
            VerifyCmd::Mac(a) => VerifyCmd::Mac(merge("verify mac", a, &file)?),
        }),
    };
    let mut config = CliConfig {
        command,
        config_file: cli.config,
        out: cli.out,
    };
    run::resolve(&mut config)?;
    Ok(config)
}
