use std::ffi::OsString;
use std::path::PathBuf;

use clap::CommandFactory;
use serde_json::Value;

use crate::args::Cli;
use crate::CliError;

/// Value of `--config` in the raw arguments, if any.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// Position just after the last subcommand token.
fn leaf_position(argv: &[OsString]) -> usize {
    let mut cmd = Cli::command();
    let mut pos = 1;
    for (i, a) in argv.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if s.starts_with('-') {
            continue;
        }
        let next = cmd.get_subcommands().find(|c| c.get_name() == s).cloned();
        if let Some(sub) = next {
            pos = i + 1;
            cmd = sub;
            if !cmd.has_subcommands() {
                break;
            }
        }
    }
    pos
}

fn scalar(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(CliError::Usage(format!("config key '{key}' has an unsupported value"))),
    }
}

/// Flags equivalent to a JSON config object.
pub fn config_flags(text: &str) -> Result<Vec<OsString>, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Usage(format!("config file: {e}")))?;
    let Value::Object(map) = value else {
        return Err(CliError::Usage("config file must hold a JSON object".into()));
    };
    let mut out = Vec::new();
    for (key, v) in &map {
        if key == "config" {
            return Err(CliError::Usage("config files cannot nest".into()));
        }
        let flag = format!("--{key}");
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                out.push(flag.into());
                for item in items {
                    out.push(scalar(key, item)?.into());
                }
            }
            other => {
                out.push(flag.into());
                out.push(scalar(key, other)?.into());
            }
        }
    }
    Ok(out)
}

/// Raw arguments with the config file's flags spliced in ahead of the
/// explicit ones.
pub fn resolve_args(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let flags = config_flags(&text)?;
    let at = leaf_position(&argv);
    let mut out = argv[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}
