//! JSON configs: `{"command": "elliptical", "family": "t", "alpha": [0.01], ...}`.
//!
//! `command` holds the subcommand words (e.g. `"reproduce table1"`); every
//! other key becomes a flag. Arrays are comma-joined, `true` is a bare flag
//! and `false` or `null` omits the flag. Relative paths are resolved against
//! the directory of the config file.

use crate::args::{Cli, RunArgs};
use dqlab::{DqError, Result};
use serde_json::{Map, Value};
use std::path::Path;

const PATH_KEYS: [&str; 5] = ["sigma", "input", "spectral", "out", "config"];

fn invalid(msg: impl Into<String>) -> DqError {
    DqError::InvalidInput(msg.into())
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(invalid(format!("config key {key:?} must be a string, number or list of those"))),
    }
}

pub fn to_argv(obj: &Map<String, Value>, base: &Path) -> Result<Vec<String>> {
    let command = obj
        .get("command")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid("config needs a string \"command\""))?;
    let mut argv = vec!["dqlab".to_string()];
    argv.extend(command.split_whitespace().map(str::to_string));
    if argv.get(1).map(String::as_str) == Some("run") {
        return Err(invalid("configs cannot invoke run"));
    }
    for (key, value) in obj {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => argv.push(flag),
            Value::Array(items) => {
                let parts = items.iter().map(|v| scalar(key, v)).collect::<Result<Vec<_>>>()?;
                argv.push(flag);
                argv.push(parts.join(","));
            }
            other => {
                let mut text = scalar(key, other)?;
                if PATH_KEYS.contains(&key.as_str()) && Path::new(&text).is_relative() {
                    text = base.join(&text).to_string_lossy().into_owned();
                }
                argv.push(flag);
                argv.push(text);
            }
        }
    }
    Ok(argv)
}

pub fn run(a: &RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| invalid(format!("cannot read {}: {e}", a.config.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| invalid(format!("bad config {}: {e}", a.config.display())))?;
    let obj = value.as_object().ok_or_else(|| invalid("config must be a JSON object"))?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let argv = to_argv(obj, base)?;
    let cli = <Cli as clap::Parser>::try_parse_from(&argv)
        .map_err(|e| invalid(format!("config does not form a valid command: {}", e.to_string().trim())))?;
    crate::dispatch(cli)
}
