//! Configuration files are merged by splicing their settings into the
//! argument list ahead of the user's own flags; since every option may be
//! repeated and the last occurrence wins, command-line flags override the file.
//!
//! Two syntaxes are accepted, both with optional `[subcommand]` sections:
//!
//! ```text
//! seed = 7            # TOML
//! [optimize]
//! lambda = 0.1
//!
//! seed=7              # plain key=value
//! [optimize]
//! input=data/set.csv
//! ```
//!
//! Top-level keys that the chosen subcommand does not define are ignored, so
//! one file can serve several subcommands; unknown keys inside a section are
//! errors.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::{Cli, SUBCOMMANDS};
use crate::error::CliError;

const GLOBAL_WITH_VALUE: [&str; 4] = ["--config", "--threads", "--seed", "--output"];
const GLOBAL_KEYS: [&str; 3] = ["threads", "seed", "output"];

#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub section: Option<String>,
    pub key: String,
    pub value: String,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('_', "-")
}

pub fn parse(text: &str) -> Result<Vec<Setting>, CliError> {
    match text.parse::<toml::Table>() {
        Ok(table) => from_toml(&table),
        Err(_) => parse_plain(text),
    }
}

fn toml_scalar(key: &str, v: &toml::Value) -> Result<String, CliError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(format!("{f:?}")),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(CliError::usage(format!("config key '{key}' must be a scalar"))),
    }
}

fn from_toml(table: &toml::Table) -> Result<Vec<Setting>, CliError> {
    let mut out = Vec::new();
    for (k, v) in table {
        if let toml::Value::Table(inner) = v {
            for (ik, iv) in inner {
                out.push(Setting {
                    section: Some(k.clone()),
                    key: normalize_key(ik),
                    value: toml_scalar(ik, iv)?,
                });
            }
        } else {
            out.push(Setting {
                section: None,
                key: normalize_key(k),
                value: toml_scalar(k, v)?,
            });
        }
    }
    Ok(out)
}

fn parse_plain(text: &str) -> Result<Vec<Setting>, CliError> {
    let mut section = None;
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", n + 1)))?;
        out.push(Setting {
            section: section.clone(),
            key: normalize_key(k),
            value: v.trim().trim_matches('"').to_string(),
        });
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<Setting>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

/// Position of the config path and of the subcommand in `argv`.
fn scan(argv: &[OsString]) -> (Option<OsString>, Option<usize>) {
    let mut config = None;
    let mut i = 1;
    while i < argv.len() {
        let tok = argv[i].to_string_lossy();
        if let Some(v) = tok.strip_prefix("--config=") {
            config = Some(OsString::from(v));
        } else if GLOBAL_WITH_VALUE.contains(&tok.as_ref()) {
            if tok == "--config" {
                config = argv.get(i + 1).cloned();
            }
            i += 1;
        } else if SUBCOMMANDS.contains(&tok.as_ref()) {
            // Options after the subcommand may still carry --config.
            for (j, a) in argv.iter().enumerate().skip(i + 1) {
                let a = a.to_string_lossy();
                if a == "--config" {
                    config = argv.get(j + 1).cloned();
                } else if let Some(v) = a.strip_prefix("--config=") {
                    config = Some(OsString::from(v));
                }
            }
            return (config, Some(i));
        }
        i += 1;
    }
    (config, None)
}

fn flag_args(key: &str, value: &str, takes_value: bool) -> Result<Vec<OsString>, CliError> {
    if takes_value {
        return Ok(vec![OsString::from(format!("--{key}={value}"))]);
    }
    match value {
        "true" | "1" | "yes" => Ok(vec![OsString::from(format!("--{key}"))]),
        "false" | "0" | "no" => Ok(Vec::new()),
        other => Err(CliError::usage(format!("config flag '{key}' needs true or false, got '{other}'"))),
    }
}

/// Splice config-file settings into `argv` so that explicit flags win.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let (config, sub_idx) = scan(&argv);
    let (Some(path), Some(sub_idx)) = (config, sub_idx) else {
        return Ok(argv);
    };
    let settings = load(Path::new(&path))?;
    let sub_name = argv[sub_idx].to_string_lossy().to_string();
    let root = Cli::command();
    let sub = root.find_subcommand(&sub_name).expect("scanned name is a subcommand");

    let mut global = Vec::new();
    let mut local = Vec::new();
    for s in settings {
        if let Some(sec) = &s.section {
            if !SUBCOMMANDS.contains(&sec.as_str()) {
                return Err(CliError::usage(format!("unknown config section [{sec}]")));
            }
            if *sec != sub_name {
                continue;
            }
        }
        if s.key == "config" {
            return Err(CliError::usage("config files cannot include other config files"));
        }
        if GLOBAL_KEYS.contains(&s.key.as_str()) {
            global.extend(flag_args(&s.key, &s.value, true)?);
            continue;
        }
        let arg = sub.get_arguments().find(|a| a.get_long() == Some(s.key.as_str()));
        match arg {
            Some(a) => local.extend(flag_args(&s.key, &s.value, a.get_action().takes_values())?),
            None if s.section.is_none() => {}
            None => {
                return Err(CliError::usage(format!(
                    "config key '{}' is not an option of '{sub_name}'",
                    s.key
                )))
            }
        }
    }

    let mut out = Vec::with_capacity(argv.len() + global.len() + local.len());
    out.push(argv[0].clone());
    out.extend(global);
    out.extend(argv[1..=sub_idx].iter().cloned());
    out.extend(local);
    out.extend(argv[sub_idx + 1..].iter().cloned());
    Ok(out)
}
