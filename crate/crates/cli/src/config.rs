//! Merging a TOML config file into the command line.
//!
//! Top-level keys set global flags; a table named after the subcommand
//! sets that subcommand's flags. Keys are flag names with `-` or `_`.
//! A flag given on the command line always wins over the file.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};

fn usage_error(cmd: &mut Command, msg: String) -> clap::Error {
    cmd.error(ErrorKind::InvalidValue, msg)
}

fn scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Appends `--flag value` tokens for config entries not already set on the
/// command line.
fn push_entries(
    root: &mut Command,
    cmd: &Command,
    matches: &ArgMatches,
    table: &toml::Table,
    scope: &str,
    out: &mut Vec<OsString>,
) -> Result<(), clap::Error> {
    for (key, value) in table {
        if value.is_table() {
            continue;
        }
        let id = key.replace('-', "_");
        let Some(arg) = cmd.get_arguments().find(|a| a.get_id().as_str() == id && a.get_long().is_some()) else {
            return Err(usage_error(root, format!("unknown key `{key}` in config {scope}")));
        };
        if id == "config" {
            return Err(usage_error(root, "`config` cannot be set from a config file".into()));
        }
        if matches.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let long = format!("--{}", arg.get_long().expect("long flag"));
        match arg.get_action() {
            ArgAction::SetTrue | ArgAction::SetFalse => match value {
                toml::Value::Boolean(true) => out.push(long.into()),
                toml::Value::Boolean(false) => {}
                _ => return Err(usage_error(root, format!("config key `{key}` must be a boolean"))),
            },
            _ => {
                let values: Vec<String> = match value {
                    toml::Value::Array(a) => a.iter().map(scalar).collect::<Option<_>>(),
                    v => scalar(v).map(|s| vec![s]),
                }
                .ok_or_else(|| usage_error(root, format!("config key `{key}` has an unsupported value")))?;
                for v in values {
                    out.push(long.clone().into());
                    out.push(v.into());
                }
            }
        }
    }
    Ok(())
}

/// Returns `args` extended with the settings of the `--config` file, if
/// one is named.
pub fn merge(cmd: &Command, args: Vec<OsString>) -> Result<Vec<OsString>, clap::Error> {
    let mut root = cmd.clone();
    let pre = cmd.clone().ignore_errors(true).try_get_matches_from(&args)?;
    let Some(path) = pre.get_one::<PathBuf>("config").cloned() else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage_error(&mut root, format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        text.parse().map_err(|e| usage_error(&mut root, format!("invalid config {}: {e}", path.display())))?;
    for (key, value) in &table {
        if value.is_table() && cmd.find_subcommand(key).is_none() {
            return Err(usage_error(&mut root, format!("unknown table [{key}] in config")));
        }
    }
    let mut extra = Vec::new();
    let Some((name, sub_matches)) = pre.subcommand() else {
        return Ok(args);
    };
    let sub = cmd.find_subcommand(name).expect("parsed subcommand").clone();
    push_entries(&mut root, cmd, sub_matches, &table, "(top level)", &mut extra)?;
    if let Some(toml::Value::Table(t)) = table.get(name) {
        push_entries(&mut root, &sub, sub_matches, t, &format!("[{name}]"), &mut extra)?;
    }
    let mut out = args;
    out.extend(extra);
    Ok(out)
}
