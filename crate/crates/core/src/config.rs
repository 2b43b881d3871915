//! Flat `key = value` run files mirroring the command-line flags.
//!
//! Blank lines, `#`/`;` comments and `[section]` headers are skipped. A key maps to the
//! flag `--key`; `true`/`false` toggle switches.

use std::ffi::OsString;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
}

/// Parse the file contents into `(key, value)` pairs in file order.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: k + 1, text: raw.to_string() });
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: k + 1, text: raw.to_string() });
        }
        let value = value.trim().trim_matches('"').to_string();
        out.push((key, value));
    }
    Ok(out)
}

/// Flags equivalent to the pairs; `false` switches are dropped.
pub fn to_args(pairs: &[(String, String)]) -> Vec<OsString> {
    let mut args = Vec::new();
    for (key, value) in pairs {
        match value.to_ascii_lowercase().as_str() {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{key}").into());
                args.push(value.into());
            }
        }
    }
    args
}

pub fn load(path: &Path) -> Result<Vec<OsString>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    Ok(to_args(&parse(&text)?))
}
