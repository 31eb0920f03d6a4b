//! Experiment harness: argument handling, output files and the acceptance
//! criteria shared by the `verify` subcommand and the acceptance test.

pub mod cli;
pub mod commands;
pub mod config;
pub mod criteria;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};

use crate::cli::Cli;
use crate::config::Manifest;

/// Args that describe where and how to run rather than what to compute.
const NOT_RECORDED: [&str; 3] = ["out", "workers", "config"];

fn command() -> clap::Command {
    Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true))
}

/// Resolved long-flag values of a subcommand, defaults included.
fn recorded_args(cmd: &clap::Command, m: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if NOT_RECORDED.contains(&id) || id == "help" || id == "version" {
            continue;
        }
        let Some(raw) = m.get_raw(id) else { continue };
        let defaulted = m.value_source(id) == Some(ValueSource::DefaultValue);
        // a replayed default would collide with an explicitly set rival
        if defaulted
            && cmd
                .get_arg_conflicts_with(arg)
                .iter()
                .any(|c| m.value_source(c.get_id().as_str()) == Some(ValueSource::CommandLine))
        {
            continue;
        }
        let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        out.insert(long.to_string(), vals.join(","));
    }
    out
}

/// Parses `argv`, runs the subcommand and returns the exit code.
pub fn run(argv: Vec<OsString>) -> anyhow::Result<i32> {
    let argv = config::resolve_argv(argv)?;
    let root = command();
    let matches = match root.clone().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            e.print()?;
            return Ok(0);
        }
        Err(e) => {
            e.print()?;
            return Ok(2);
        }
    };
    let cli = Cli::from_arg_matches(&matches)?;
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        anyhow::bail!("--workers must be at least 1");
    }
    // fails only if a pool already exists, which is harmless
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global();

    let name = cli.command.name();
    let (sub_matches, sub_cmd) = matches
        .subcommand_matches(name)
        .zip(root.find_subcommand(name))
        .ok_or_else(|| anyhow::anyhow!("missing subcommand"))?;
    let manifest = Manifest {
        subcommand: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        args: {
            let mut a = recorded_args(sub_cmd, sub_matches);
            a.insert("seed".into(), cli.seed.to_string());
            a
        },
        workers,
    };
    let out = commands::Outputs::create(
        cli.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(name)),
    )?;
    out.json("manifest.json", &manifest)?;
    commands::run(&cli.command, cli.seed, &out)
}
