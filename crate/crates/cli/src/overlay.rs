//! Flag values read from a TOML file and merged under the command line.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command};

/// `--config` of a subcommand other than `campaign`, read from raw arguments.
pub fn config_path(argv: &[OsString]) -> Option<(String, std::path::PathBuf)> {
    let name = argv.get(1)?.to_str()?.to_string();
    if name == "campaign" || name.starts_with('-') {
        return None;
    }
    let mut it = argv.iter().skip(2);
    while let Some(a) = it.next() {
        let a = a.to_str()?;
        if a == "--config" {
            return Some((name, it.next()?.into()));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some((name, p.into()));
        }
    }
    None
}

fn on_command_line(argv: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    argv.iter()
        .skip(2)
        .filter_map(|a| a.to_str())
        .any(|a| a == flag || a.starts_with(&format!("{flag}=")))
}

/// Appends `--flag=value` for every key of `path` not already given on the
/// command line. Keys come from the top level and from a `[subcommand]` table,
/// the latter winning.
pub fn apply(
    root: &Command,
    argv: &[OsString],
    name: &str,
    path: &Path,
) -> Result<Vec<OsString>, Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![format!("config {}: {e}", path.display())])?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| vec![format!("config {}: {e}", path.display())])?;
    let mut entries: Vec<(String, toml::Value)> = Vec::new();
    for (k, v) in &table {
        if !v.is_table() {
            entries.push((k.clone(), v.clone()));
        }
    }
    if let Some(toml::Value::Table(t)) = table.get(name) {
        for (k, v) in t {
            entries.retain(|(e, _)| e.replace('-', "_") != k.replace('-', "_"));
            entries.push((k.clone(), v.clone()));
        }
    }
    let Some(cmd) = root.find_subcommand(name) else {
        return Ok(argv.to_vec());
    };
    let mut out = argv.to_vec();
    let mut errs = Vec::new();
    for (key, value) in entries {
        let id = key.replace('-', "_");
        let Some(arg) = cmd
            .get_arguments()
            .find(|a| a.get_id().as_str() == id && id != "config")
        else {
            errs.push(format!("config: unknown key `{key}` for `{name}`"));
            continue;
        };
        let long = arg.get_long().expect("every flag is long");
        if on_command_line(argv, long) {
            log::warn!(
                "--{long} on the command line overrides `{key}` from {}",
                path.display()
            );
            continue;
        }
        let is_flag = matches!(arg.get_action(), ArgAction::SetTrue);
        match (&value, is_flag) {
            (toml::Value::Boolean(true), true) => out.push(format!("--{long}").into()),
            (toml::Value::Boolean(false), true) => {}
            (_, true) => errs.push(format!("config: `{key}` must be true or false")),
            (v, false) => match scalar_text(v) {
                Some(s) => out.push(format!("--{long}={s}").into()),
                None => errs.push(format!(
                    "config: `{key}` must be a string, number or list of them"
                )),
            },
        }
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(errs)
    }
}

fn scalar_text(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Array(a) => a
            .iter()
            .map(scalar_text)
            .collect::<Option<Vec<_>>>()
            .map(|v| v.join(",")),
        _ => None,
    }
}
