//! Config files and argument resolution.
//!
//! A config file holds flat `key = value` lines, where each key is a long
//! flag name. A manifest written by a previous run is accepted as well.
//! Config values are spliced in ahead of the command-line flags; a flag
//! given on the command line drops the config entry of the same name.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context};

/// Global flags that take a value and may precede the subcommand.
const VALUE_GLOBALS: [&str; 4] = ["--seed", "--out", "--workers", "--config"];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value, got {raw:?}", n + 1);
        };
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Subcommand named by a manifest, if any, and the flag pairs.
pub type Loaded = (Option<String>, Vec<(String, String)>);

/// Reads a config file or a JSON manifest.
pub fn load(path: &Path) -> anyhow::Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        let m: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("bad manifest {}", path.display()))?;
        return Ok((Some(m.subcommand), m.args.into_iter().collect()));
    }
    Ok((None, parse_key_values(&text)?))
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub version: String,
    /// Long flag name to its resolved value, defaults included.
    pub args: BTreeMap<String, String>,
    pub workers: usize,
}

fn to_flags(pairs: &[(String, String)]) -> Vec<OsString> {
    let mut out = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => out.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{k}").into());
                out.push(v.into());
            }
        }
    }
    out
}

/// Rewrites `argv` as `[bin, subcommand, config flags.., user flags..]`.
pub fn resolve_argv(argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut it = argv.into_iter();
    let bin = it.next().unwrap_or_else(|| "stacked-voter".into());
    let rest: Vec<OsString> = it.collect();
    let mut config = None;
    let mut sub_pos = None;
    let mut i = 0;
    while i < rest.len() {
        let a = rest[i].to_string_lossy();
        if a == "--config" {
            config = rest.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.into());
        } else if VALUE_GLOBALS.contains(&a.as_ref()) {
            i += 2;
            continue;
        } else if !a.starts_with('-') && sub_pos.is_none() {
            sub_pos = Some(i);
        }
        i += 1;
    }
    let Some(path) = config else {
        let mut out = vec![bin];
        out.extend(rest);
        return Ok(out);
    };
    let (manifest_sub, pairs) = load(Path::new(&path))?;
    let mut user = rest;
    // the config flag has been consumed
    if let Some(p) = user.iter().position(|a| a == "--config") {
        user.drain(p..(p + 2).min(user.len()));
    }
    user.retain(|a| !a.to_string_lossy().starts_with("--config="));
    let sub = match sub_pos {
        Some(p) => Some(user.remove(p)),
        None => manifest_sub.map(OsString::from),
    };
    // flags given on the command line replace config values outright, which
    // matters for list flags where clap would otherwise append
    let given: Vec<String> = user
        .iter()
        .filter_map(|a| {
            a.to_str()?
                .strip_prefix("--")
                .map(|f| f.split('=').next().unwrap_or(f).to_string())
        })
        .collect();
    let pairs: Vec<(String, String)> = pairs
        .into_iter()
        .filter(|(k, _)| !given.contains(k))
        .collect();
    let mut out = vec![bin];
    out.extend(sub);
    out.extend(to_flags(&pairs));
    out.extend(user);
    Ok(out)
}
