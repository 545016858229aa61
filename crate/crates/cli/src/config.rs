//! `key=value` config files. Keys are long flag names without the leading
//! dashes; blank lines and lines starting with `#` are ignored. Entries are
//! spliced into the argument list ahead of the command-line flags, so flags
//! given explicitly override them.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", i + 1);
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        entries.push((key.to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Path given with `--config`, looked up without a full parse.
pub fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn long_flags(cmd: &Command) -> Vec<(String, bool)> {
    cmd.get_arguments()
        .flat_map(|a| {
            let takes = a.get_action().takes_values();
            let mut names: Vec<(String, bool)> = a.get_long().map(|l| (l.to_string(), takes)).into_iter().collect();
            if let Some(aliases) = a.get_all_aliases() {
                names.extend(aliases.into_iter().map(|l| (l.to_string(), takes)));
            }
            names
        })
        .collect()
}

/// Index just past the innermost subcommand token, and that subcommand.
fn leaf_position<'a>(root: &'a Command, args: &[OsString]) -> (usize, &'a Command) {
    let globals: Vec<String> = long_flags(root).into_iter().filter(|(_, t)| *t).map(|(n, _)| n).collect();
    let mut cmd = root;
    let mut pos = 1;
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if let Some(flag) = s.strip_prefix("--") {
            if globals.iter().any(|g| g == flag) {
                i += 2;
                continue;
            }
            if s.contains('=') {
                i += 1;
                continue;
            }
        }
        match cmd.find_subcommand(s.as_ref()) {
            Some(sub) => {
                cmd = sub;
                pos = i + 1;
                i += 1;
                if !cmd.has_subcommands() {
                    break;
                }
            }
            None => break,
        }
    }
    (pos, cmd)
}

/// Splices config entries into `args`. Keys unknown to the selected
/// subcommand are skipped if some other subcommand accepts them.
pub fn apply_config(root: &Command, args: Vec<OsString>, path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse_config(&text)?;
    let (pos, leaf) = leaf_position(root, &args);
    let mut local = long_flags(leaf);
    local.extend(long_flags(root));
    let mut known = long_flags(root);
    for sub in root.get_subcommands() {
        known.extend(long_flags(sub));
        for inner in sub.get_subcommands() {
            known.extend(long_flags(inner));
        }
    }
    let mut spliced = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let Some(&(_, takes)) = local.iter().find(|(n, _)| *n == key) else {
            if known.iter().any(|(n, _)| *n == key) {
                continue;
            }
            bail!("config: unknown key {key:?}");
        };
        if takes {
            spliced.push(OsString::from(format!("--{key}={value}")));
        } else if value.parse::<bool>().with_context(|| format!("config: {key} expects true or false"))? {
            spliced.push(OsString::from(format!("--{key}")));
        }
    }
    let mut out = args;
    out.splice(pos..pos, spliced);
    Ok(out)
}

/// Later occurrences of a flag replace earlier ones, and negative numbers
/// are values, throughout the tree.
pub fn allow_overrides(cmd: Command) -> Command {
    cmd.args_override_self(true)
        .allow_negative_numbers(true)
        .mut_subcommands(allow_overrides)
}
