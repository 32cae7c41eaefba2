//! `--config FILE`: `key = value` lines become `--key value` flags placed
//! right after the subcommand name, so flags typed later override them.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Context;
use cropgan_core::preprocess::parse_key_values;

/// Splits `--config` out of `argv` and returns its path, if any.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    let mut found = None;
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(v) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(v));
        }
    }
    found
}

/// Index of the subcommand name: the first positional argument, skipping
/// the value of a leading `--config`.
fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" {
            i += 2;
        } else if s.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Returns `argv` with the config file's entries spliced in.
pub fn splice(argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse_key_values(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let mut out = argv[..=at].to_vec();
    for (k, v) in entries {
        out.push(format!("--{}", k.replace('_', "-")).into());
        out.push(v.into());
    }
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}
