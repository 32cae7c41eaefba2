//! The `cropgan` command line: argument parsing, config files, run
//! manifests and replay.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::Path;

use anyhow::Context;
use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command, ReplayArgs};
use commands::Run;
use manifest::RunManifest;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_FORMAT: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;
/// A replay produced files that differ from the manifest.
pub const EXIT_REPLAY_MISMATCH: u8 = 4;

/// Outputs of a replay that differ from the manifest.
#[derive(Debug, thiserror::Error)]
#[error("replay differs from the manifest: {}", .0.join("; "))]
pub struct ReplayMismatch(pub Vec<String>);

/// Maps an error to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ReplayMismatch>() {
            return EXIT_REPLAY_MISMATCH;
        }
        if let Some(e) = cause.downcast_ref::<cropgan_core::Error>() {
            return match e {
                cropgan_core::Error::Format { .. } => EXIT_FORMAT,
                cropgan_core::Error::Divergence(_) => EXIT_DIVERGENCE,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

/// Parses `argv` (program name first) and runs the command.
pub fn execute(argv: Vec<OsString>) -> anyhow::Result<()> {
    let argv = config::splice(argv)?;
    let matches = Cli::command().try_get_matches_from(argv)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    if let Command::Replay(a) = &cli.command {
        return replay(a);
    }
    let cmd = Cli::command();
    let sub_cmd = cmd.find_subcommand(name).expect("parsed subcommand exists");
    let mut record = RunManifest::capture(sub_cmd, sub)?;
    let out_dir = out_dir(&cli.command);
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let run = Run {
        out_dir: out_dir.to_path_buf(),
        config_hash: record.config_hash(),
    };
    match &cli.command {
        Command::Synth(a) => commands::synth(a, &run),
        Command::Preprocess(a) => commands::preprocess_scene(a, &run),
        Command::TrainClassifier(a) => commands::train_crop_mapper(a, &run),
        Command::TrainGan(a) => commands::train_cyclegan(a, &run),
        Command::Adapt(a) => commands::adapt(a, &run),
        Command::Predict(a) => commands::predict_dataset(a, &run),
        Command::Evaluate(a) => commands::evaluate(a, &run),
        Command::Tsne(a) => commands::embed(a, &run),
        Command::Render(a) => commands::render(a, &run),
        Command::Batch(a) => commands::batch(a, &run),
        Command::Replay(_) => unreachable!("handled above"),
    }?;
    record.record_outputs(out_dir)?;
    record.save(out_dir)?;
    Ok(())
}

fn out_dir(command: &Command) -> &Path {
    match command {
        Command::Synth(a) => &a.out.out_dir,
        Command::Preprocess(a) => &a.out.out_dir,
        Command::TrainClassifier(a) => &a.out.out_dir,
        Command::TrainGan(a) => &a.out.out_dir,
        Command::Adapt(a) => &a.out.out_dir,
        Command::Predict(a) => &a.out.out_dir,
        Command::Evaluate(a) => &a.out.out_dir,
        Command::Tsne(a) => &a.out.out_dir,
        Command::Render(a) => &a.out.out_dir,
        Command::Batch(a) => &a.out.out_dir,
        Command::Replay(a) => &a.out.out_dir,
    }
}

/// Checks the inputs still hash as recorded, re-runs the command into a
/// fresh directory and compares every output.
fn replay(a: &ReplayArgs) -> anyhow::Result<()> {
    let expected = RunManifest::load(&a.manifest)?;
    if a.out.out_dir.exists() && std::fs::read_dir(&a.out.out_dir)?.next().is_some() {
        return Err(cropgan_core::Error::Usage(format!(
            "replay needs an empty output directory, {} is not",
            a.out.out_dir.display()
        ))
        .into());
    }
    let mut changed = Vec::new();
    for (flag, want) in &expected.inputs {
        let value = expected.args.iter().find(|(k, _)| k == flag).map(|(_, v)| v.as_str()).unwrap_or("");
        let got: Vec<String> = value
            .split(',')
            .filter(|p| Path::new(p).exists())
            .map(|p| manifest::hash_path(Path::new(p)))
            .collect::<anyhow::Result<_>>()?;
        if got.join(",") != *want {
            changed.push(format!("input --{flag} ({value}) changed"));
        }
    }
    if !changed.is_empty() {
        return Err(ReplayMismatch(changed).into());
    }
    execute(expected.argv(&a.out.out_dir)).context("re-running the manifest")?;
    let replayed = RunManifest::load(&a.out.out_dir.join(manifest::MANIFEST_FILE))?;
    let mut diffs = Vec::new();
    for (path, h) in &expected.outputs {
        match replayed.outputs.get(path) {
            None => diffs.push(format!("{path} missing")),
            Some(g) if g != h => diffs.push(format!("{path} differs")),
            Some(_) => {}
        }
    }
    diffs.extend(
        replayed
            .outputs
            .keys()
            .filter(|p| !expected.outputs.contains_key(*p))
            .map(|p| format!("{p} is new")),
    );
    if !diffs.is_empty() {
        return Err(ReplayMismatch(diffs).into());
    }
    println!("replayed {}: {} output files identical", expected.command, expected.outputs.len());
    Ok(())
}
