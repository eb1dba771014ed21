//! Flat `key = value` config files.
//!
//! A config file is merged into the argument vector before clap sees it:
//! global keys go right after the program name, subcommand keys right after
//! the subcommand token. Flags given on the command line come later and win.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use clap::Command;

pub const GLOBAL_KEYS: [&str; 3] = ["seed", "out-dir", "threads"];

/// Global options that take a value, needed to find the subcommand token.
const GLOBAL_VALUED: [&str; 4] = ["--seed", "--out-dir", "--threads", "--config"];

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        if !seen.insert(key.clone()) {
            return Err(format!("line {}: duplicate key `{key}`", n + 1));
        }
        out.push((key, value));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

fn subcommand_position(args: &[OsString], cmd: &Command) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if GLOBAL_VALUED.contains(&s.as_ref()) {
            i += 2;
            continue;
        }
        if cmd.find_subcommand(s.as_ref()).is_some() {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn subcommand_keys(cmd: &Command, name: &str) -> BTreeSet<String> {
    cmd.find_subcommand(name)
        .map(|sub| {
            sub.get_arguments()
                .filter(|a| !a.is_global_set())
                .filter_map(|a| a.get_long().map(str::to_string))
                .filter(|l| l != "help" && l != "version")
                .collect()
        })
        .unwrap_or_default()
}

fn env_overrides(key: &str) -> bool {
    match key {
        "out-dir" => std::env::var_os("ENTLAB_OUT_DIR").is_some(),
        "threads" => std::env::var_os("ENTLAB_THREADS").is_some(),
        _ => false,
    }
}

/// Returns `args` with the config file's entries spliced in, or `args`
/// unchanged when no `--config` is given.
pub fn expand_args(args: Vec<OsString>, cmd: &Command) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let entries = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let pos = subcommand_position(&args, cmd).ok_or("a config file needs a subcommand")?;
    let name = args[pos].to_string_lossy().into_owned();
    let keys = subcommand_keys(cmd, &name);

    let mut global = Vec::new();
    let mut local = Vec::new();
    for (key, value) in entries {
        let token = OsString::from(format!("--{key}={value}"));
        if GLOBAL_KEYS.contains(&key.as_str()) {
            if !env_overrides(&key) {
                global.push(token);
            }
        } else if keys.contains(&key) {
            local.push(token);
        } else {
            return Err(format!(
                "{}: unknown key `{key}` for `{name}`",
                path.display()
            ));
        }
    }

    let mut out = Vec::with_capacity(args.len() + global.len() + local.len());
    out.push(args[0].clone());
    out.extend(global);
    out.extend(args[1..=pos].iter().cloned());
    out.extend(local);
    out.extend(args[pos + 1..].iter().cloned());
    Ok(out)
}
