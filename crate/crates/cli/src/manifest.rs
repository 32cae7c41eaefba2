//! Run manifests: the effective arguments of a command, the hashes of its
//! inputs and the hashes of every file it wrote.
//!
//! ```text
//! # cropgan run manifest
//! command = train-gan
//! version = 0.1.0
//! config_hash = <sha256 of the command, non-input arguments and input hashes>
//! arg.<flag> = <value>          one line per flag, defaults included
//! input.<flag> = <sha256>       one line per input file or directory
//! output.<path> = <sha256>      one line per file under --out-dir
//! ```
//!
//! Input paths are stored absolute so a manifest can be replayed from any
//! working directory. A directory hashes as the sha256 of its sorted
//! `path\0sha256\n` listing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::ArgMatches;
use cropgan_core::preprocess::parse_key_values;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "run_manifest.txt";
const HEADER: &str = "# cropgan run manifest";

/// Flags that name files or directories a command reads.
pub const INPUT_FLAGS: [&str; 10] = [
    "data",
    "scene",
    "source",
    "target",
    "generator",
    "classifier",
    "predictions",
    "truth",
    "baseline",
    "adapted",
];

/// Flags left out of the manifest: already spliced, or replaced on replay.
const SKIPPED_FLAGS: [&str; 2] = ["config", "out-dir"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Flag name (without dashes) and value, in declaration order.
    pub args: Vec<(String, String)>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files under `dir` relative to it, with `/` separators, sorted.
pub fn list_files(dir: &Path) -> anyhow::Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry?;
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(dir)?;
            let parts: Vec<_> = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect();
            out.push(parts.join("/"));
        }
    }
    Ok(out)
}

pub fn hash_path(path: &Path) -> anyhow::Result<String> {
    if path.is_dir() {
        let mut listing = String::new();
        for rel in list_files(path)? {
            let h = sha256_bytes(&std::fs::read(path.join(&rel))?);
            writeln!(listing, "{rel}\0{h}").unwrap();
        }
        Ok(sha256_bytes(listing.as_bytes()))
    } else {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(sha256_bytes(&bytes))
    }
}

fn absolute(value: &str) -> String {
    value
        .split(',')
        .map(|p| match std::fs::canonicalize(p) {
            Ok(abs) => abs.to_string_lossy().into_owned(),
            Err(_) => p.to_owned(),
        })
        .collect::<Vec<_>>()
        .join(",")
}

impl RunManifest {
    /// Captures the effective arguments of a parsed subcommand and hashes its
    /// inputs. Missing inputs are left for the command itself to report.
    pub fn capture(command: &clap::Command, matches: &ArgMatches) -> anyhow::Result<Self> {
        let mut args = Vec::new();
        let mut inputs = BTreeMap::new();
        for arg in command.get_arguments() {
            let id = arg.get_id();
            let flag = id.as_str().replace('_', "-");
            if SKIPPED_FLAGS.contains(&flag.as_str()) {
                continue;
            }
            let Ok(Some(raw)) = matches.try_get_raw(id.as_str()) else {
                continue;
            };
            let mut value = raw.map(|v| v.to_string_lossy().into_owned()).collect::<Vec<_>>().join(",");
            if INPUT_FLAGS.contains(&flag.as_str()) {
                value = absolute(&value);
                let mut hashes = Vec::new();
                for p in value.split(',') {
                    if Path::new(p).exists() {
                        hashes.push(hash_path(Path::new(p))?);
                    }
                }
                inputs.insert(flag.clone(), hashes.join(","));
            }
            if value.contains('\n') {
                bail!("argument --{flag} contains a newline");
            }
            args.push((flag, value));
        }
        Ok(RunManifest {
            command: command.get_name().to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            args,
            inputs,
            outputs: BTreeMap::new(),
        })
    }

    /// Identifies the run independently of where its inputs live and of
    /// argument order.
    pub fn config_hash(&self) -> String {
        let mut s = format!("{}\n", self.command);
        let sorted: BTreeMap<&String, &String> = self.args.iter().map(|(k, v)| (k, v)).collect();
        for (k, v) in sorted {
            let shown = self.inputs.get(k).unwrap_or(v);
            writeln!(s, "{k}={shown}").unwrap();
        }
        sha256_bytes(s.as_bytes())
    }

    /// Hashes every file under `out_dir` except the manifest itself.
    pub fn record_outputs(&mut self, out_dir: &Path) -> anyhow::Result<()> {
        self.outputs.clear();
        for rel in list_files(out_dir)? {
            if rel != MANIFEST_FILE {
                let h = sha256_bytes(&std::fs::read(out_dir.join(&rel))?);
                self.outputs.insert(rel, h);
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\ncommand = {}\nversion = {}\n", self.command, self.version);
        writeln!(s, "config_hash = {}", self.config_hash()).unwrap();
        for (k, v) in &self.args {
            writeln!(s, "arg.{k} = {v}").unwrap();
        }
        for (k, v) in &self.inputs {
            writeln!(s, "input.{k} = {v}").unwrap();
        }
        for (k, v) in &self.outputs {
            writeln!(s, "output.{k} = {v}").unwrap();
        }
        s
    }

    pub fn save(&self, out_dir: &Path) -> anyhow::Result<PathBuf> {
        let path = out_dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_text())?;
        Ok(path)
    }

    /// Parses a manifest. Argument order is not preserved (flags are named,
    /// so it does not matter).
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        if text.lines().next() != Some(HEADER) {
            return Err(cropgan_core::Error::Format {
                offset: 0,
                message: format!("expected {HEADER:?} on the first line"),
            }
            .into());
        }
        let map = parse_key_values(text)?;
        let field = |k: &str| {
            map.get(k).cloned().ok_or_else(|| {
                anyhow!(cropgan_core::Error::Format {
                    offset: 0,
                    message: format!("manifest lacks '{k}'"),
                })
            })
        };
        let mut m = RunManifest {
            command: field("command")?,
            version: field("version")?,
            args: Vec::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        };
        for (k, v) in &map {
            if let Some(flag) = k.strip_prefix("arg.") {
                m.args.push((flag.to_owned(), v.clone()));
            } else if let Some(flag) = k.strip_prefix("input.") {
                m.inputs.insert(flag.to_owned(), v.clone());
            } else if let Some(path) = k.strip_prefix("output.") {
                m.outputs.insert(path.to_owned(), v.clone());
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        Self::parse(&text)
    }

    /// Command line that re-runs this manifest into `out_dir`.
    pub fn argv(&self, out_dir: &Path) -> Vec<std::ffi::OsString> {
        let mut argv: Vec<std::ffi::OsString> = vec!["cropgan".into(), self.command.clone().into()];
        for (k, v) in &self.args {
            argv.push(format!("--{k}").into());
            argv.push(v.into());
        }
        argv.push("--out-dir".into());
        argv.push(out_dir.into());
        argv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut m = RunManifest {
            command: "predict".into(),
            version: "0.1.0".into(),
            args: vec![("classifier".into(), "/a/c.ckpt".into()), ("data".into(), "/a/d.cgts".into())],
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        };
        m.inputs.insert("classifier".into(), "ab".into());
        m.inputs.insert("data".into(), "cd".into());
        m.outputs.insert("predictions.csv".into(), "ef".into());
        let back = RunManifest::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn config_hash_ignores_input_locations() {
        let mut a = RunManifest {
            command: "adapt".into(),
            version: "0.1.0".into(),
            args: vec![("data".into(), "/x/t.cgts".into())],
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        };
        a.inputs.insert("data".into(), "00".into());
        let mut b = a.clone();
        b.args[0].1 = "/y/t.cgts".into();
        assert_eq!(a.config_hash(), b.config_hash());
        b.inputs.insert("data".into(), "01".into());
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn directories_hash_their_listing() {
        let d = tempfile::tempdir().unwrap();
        std::fs::create_dir(d.path().join("sub")).unwrap();
        std::fs::write(d.path().join("sub/a.txt"), "a").unwrap();
        std::fs::write(d.path().join("b.txt"), "b").unwrap();
        assert_eq!(list_files(d.path()).unwrap(), vec!["b.txt", "sub/a.txt"]);
        let h1 = hash_path(d.path()).unwrap();
        std::fs::write(d.path().join("sub/a.txt"), "A").unwrap();
        assert_ne!(hash_path(d.path()).unwrap(), h1);
    }

    #[test]
    fn bad_header_is_a_format_error() {
        let err = RunManifest::parse("command = x\n").unwrap_err();
        assert!(matches!(err.downcast_ref::<cropgan_core::Error>(), Some(cropgan_core::Error::Format { .. })));
    }
}
