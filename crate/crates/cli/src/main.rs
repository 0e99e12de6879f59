mod args;
mod commands;
mod config;
mod error;
mod output;

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};
use serde_json::Value;

use args::{Cli, Command};
use commands::Outcome;
use error::{CliError, EXIT_USAGE};
use output::{Envelope, SCHEMA_VERSION};

/// Effective option values of the chosen subcommand, keyed by argument id.
fn config_echo(top: &ArgMatches, sub: &ArgMatches, sub_name: &str) -> BTreeMap<String, Value> {
    let root = Cli::command();
    let sub_cmd = root.find_subcommand(sub_name).expect("matched subcommand exists");
    let mut out = BTreeMap::new();
    for (m, cmd) in [(top, &root), (sub, sub_cmd)] {
        for id in m.ids() {
            let id = id.as_str();
            // Skip argument groups generated for flattened structs.
            if !cmd.get_arguments().any(|a| a.get_id() == id) {
                continue;
            }
            let Ok(Some(raw)) = m.try_get_raw(id) else {
                continue;
            };
            let mut vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            let value = match m.value_source(id) {
                // Flags report "true"/"false"; keep them boolean.
                Some(ValueSource::DefaultValue | ValueSource::CommandLine) if vals.len() == 1 => {
                    let v = vals.pop().expect("one value");
                    match v.as_str() {
                        "true" => Value::Bool(true),
                        "false" => Value::Bool(false),
                        _ => Value::String(v),
                    }
                }
                _ => Value::from(vals),
            };
            out.insert(id.to_string(), value);
        }
    }
    out
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Optimize(a) => commands::optimize(a, seed),
        Command::Estimate(a) => commands::estimate(a, seed),
        Command::Compare(a) => commands::compare(a, seed),
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Baseline(a) => commands::baseline(a, seed),
        Command::Synth(a) => commands::synth(a, seed),
        Command::Varbench(a) => commands::varbench(a, seed),
        Command::CompareMethods(a) => commands::compare_methods(a, seed),
    }
}

fn run() -> Result<(), CliError> {
    let argv = config::merge(std::env::args_os().collect())?;
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return Err(CliError {
                code,
                message: String::new(),
            });
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::usage(e.to_string()))?;
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let echo = config_echo(&matches, sub, name);

    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot set up thread pool: {e}")))?;
    }

    let started = chrono::Utc::now();
    let outcome = dispatch(&cli)?;
    let finished = chrono::Utc::now();
    let text = match outcome {
        Outcome::Raw(text) => text,
        Outcome::Json(payload) => output::to_json(&Envelope {
            schema_version: SCHEMA_VERSION,
            command: cli.command.name(),
            tool_version: env!("CARGO_PKG_VERSION"),
            config: echo,
            started_at: started.to_rfc3339(),
            finished_at: finished.to_rfc3339(),
            payload,
        }),
    };
    output::emit(&text, cli.output.as_deref())?;
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message.is_empty() {
                eprintln!("error: {}", e.message);
            }
            ExitCode::from(e.code)
        }
    }
}
