//! Batch front end for nanonmr-core: JSON configuration, command dispatch and
//! CSV/JSON output.

pub mod commands;
pub mod config;
pub mod output;

use std::fs;

use serde::Serialize;

pub use commands::{run_command, Artifact};
pub use config::{parse_config, parse_config_for, Command, ConfigError, Format, RunConfig};
pub use output::{parse_series, read_series, write_series, Provenance};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "NANONMR_THREADS";

/// Machine-readable failure description, printed as JSON on stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub command: Option<String>,
    /// `usage`, `config`, `io` or `compute`.
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    pub message: String,
}

impl ErrorReport {
    pub fn new(command: Option<Command>, kind: &'static str, message: impl Into<String>) -> Self {
        ErrorReport { status: "error", command: command.map(|c| c.to_string()), kind, key: None, line: None, column: None, message: message.into() }
    }

    pub fn from_config(command: Option<Command>, e: &ConfigError) -> Self {
        let mut r = ErrorReport::new(command, "config", e.to_string());
        match e {
            ConfigError::Syntax { line, column, .. } => {
                r.line = Some(*line);
                r.column = Some(*column);
            }
            ConfigError::Semantic { key, .. } => r.key = Some(key.clone()),
            ConfigError::Units(_) => {}
        }
        r
    }

    pub fn from_run(command: Command, e: &anyhow::Error) -> Self {
        let kind = if e.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) { "io" } else { "compute" };
        ErrorReport::new(Some(command), kind, format!("{e:#}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            "usage" | "config" => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Writes every artifact; the ones without a path go to `stdout`.
pub fn emit(artifacts: &[Artifact], stdout: &mut impl std::io::Write) -> anyhow::Result<()> {
    use anyhow::Context;
    for a in artifacts {
        match &a.path {
            Some(p) => fs::write(p, &a.contents).with_context(|| format!("writing {}", p.display()))?,
            None => stdout.write_all(a.contents.as_bytes()).context("writing to stdout")?,
        }
    }
    Ok(())
}
