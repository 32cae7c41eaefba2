//! One function per subcommand. Each writes its files into the output
//! directory and prints a short summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cropgan_core::benchmark::{self, BenchmarkConfig};
use cropgan_core::classifier::{predict, split_dataset, train_classifier, ClassifierConfig, Prediction, SplitSpec};
use cropgan_core::gan::{train_gan, transform_target, CheckpointDir, EpochObserver, EpochRecord, GanConfig, GanNetworks};
use cropgan_core::metrics::{confusion, ConfusionMatrix};
use cropgan_core::numfmt::format_f64;
use cropgan_core::preprocess::{load_scene, preprocess, save_scene};
use cropgan_core::render::{render_error_map, render_map, ClassRaster, Palette};
use cropgan_core::synth::{make_scene, DomainShift, DomainSpec, Preset, SceneSpec};
use cropgan_core::tsne::{subsample, tsne, TsneConfig, MAX_POINTS};
use cropgan_core::{AdamConfig, Checkpoint, LabeledDataset, Role, Tensor};

use crate::args::*;

/// Per-run context shared by the commands.
pub struct Run {
    pub out_dir: PathBuf,
    /// Stamped on every checkpoint the run writes.
    pub config_hash: String,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let path = self.path(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }
}

fn load_dataset(path: &Path) -> anyhow::Result<LabeledDataset> {
    LabeledDataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_predictions(path: &Path) -> anyhow::Result<Prediction> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Prediction::from_csv(&text).with_context(|| format!("parsing predictions {}", path.display()))
}

fn load_role(path: &Path, role: Role) -> anyhow::Result<Checkpoint> {
    Checkpoint::load_role(path, role).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn synth(a: &SynthArgs, run: &Run) -> anyhow::Result<()> {
    let preset = Preset::from(a.preset);
    match a.kind {
        SynthKind::Dataset => {
            let mut config = BenchmarkConfig::new(preset, a.seed);
            config.n_per_class = a.n_per_class;
            let (source, target) = benchmark::domains(&config)?;
            source.save(&run.path("source.cgts"))?;
            target.save(&run.path("target.cgts"))?;
            println!("{} source and {} target samples ({})", source.len(), target.len(), preset.name());
        }
        SynthKind::Scene => {
            let domains = [
                ("source", DomainShift::default(), a.seed.wrapping_mul(2)),
                ("target", preset.shift(), a.seed.wrapping_mul(2).wrapping_add(1)),
            ];
            for (name, shift, seed) in domains {
                let spec = SceneSpec {
                    cloud_gap_prob: a.cloud_prob,
                    ..SceneSpec::new(a.width, a.height, a.field_size, DomainSpec::new(a.n_per_class, shift, seed))
                };
                let scene = make_scene(&spec)?;
                let dir = run.path(name);
                std::fs::create_dir_all(&dir)?;
                save_scene(&scene.stack, &dir)?;
            }
            println!("{}x{} source and target scenes ({})", a.width, a.height, preset.name());
        }
    }
    Ok(())
}

pub fn preprocess_scene(a: &PreprocessArgs, run: &Run) -> anyhow::Result<()> {
    let stack = load_scene(&a.scene).with_context(|| format!("loading scene {}", a.scene.display()))?;
    let (ds, report) = preprocess(&stack, "dataset")?;
    ds.save(&run.path("dataset.cgts"))?;
    let text = format!(
        "pixels = {}\nnon_cropland = {}\ndropped = {}\nretained = {}\n",
        report.pixels, report.non_cropland, report.dropped, report.retained
    );
    run.write("report.txt", &text)?;
    println!(
        "{} pixels: {} outside cropland, {} dropped, {} samples",
        report.pixels, report.non_cropland, report.dropped, report.retained
    );
    Ok(())
}

/// `method,oa,f1,kappa,tp,fp,fn,tn,note`; the note reads `no-positives` when
/// F1 is 0 by convention rather than by measurement.
fn metrics_csv(rows: &[(&str, ConfusionMatrix)]) -> String {
    let mut s = String::from("method,oa,f1,kappa,tp,fp,fn,tn,note\n");
    for (name, cm) in rows {
        let note = if cm.tp + cm.fp + cm.fn_ == 0 { "no-positives" } else { "" };
        writeln!(
            s,
            "{name},{},{},{},{},{},{},{},{note}",
            format_f64(cm.overall_accuracy()),
            format_f64(cm.f1()),
            format_f64(cm.kappa()),
            cm.tp,
            cm.fp,
            cm.fn_,
            cm.tn
        )
        .unwrap();
    }
    s
}

fn metrics_table(rows: &[(&str, ConfusionMatrix)]) -> String {
    let mut s = format!("{:<10} {:>8} {:>8} {:>8}\n", "method", "OA", "F1", "Kappa");
    for (name, cm) in rows {
        let flag = if cm.tp + cm.fp + cm.fn_ == 0 { "  (no positives)" } else { "" };
        writeln!(
            s,
            "{name:<10} {:>8.4} {:>8.4} {:>8.4}{flag}",
            cm.overall_accuracy(),
            cm.f1(),
            cm.kappa()
        )
        .unwrap();
    }
    s
}

pub fn train_crop_mapper(a: &TrainClassifierArgs, run: &Run) -> anyhow::Result<()> {
    let ds = load_dataset(&a.data)?;
    let spec = SplitSpec {
        train_fraction: a.train_fraction,
        validation_fraction: a.validation_fraction,
        test_fraction: a.test_fraction,
        seed: a.seed,
    };
    let (train, validation, test) = split_dataset(&ds, &spec)?;
    let config = ClassifierConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        adam: AdamConfig::with_learning_rate(a.lr, a.beta1),
        seed: a.seed,
    };
    let clf = train_classifier(&train, &validation, &config)?;
    let ck = clf.checkpoint.clone().with_meta("config_hash", &run.config_hash);
    ck.save(&run.path("classifier.ckpt"))?;
    run.write("history.csv", clf.history.to_csv())?;
    train.save(&run.path("train.cgts"))?;
    validation.save(&run.path("validation.cgts"))?;
    test.save(&run.path("test.cgts"))?;

    let pred = predict(&ck.network, &test)?;
    let cm = confusion(&pred.labels, test.require_labels()?)?;
    run.write("test_metrics.csv", metrics_csv(&[("test", cm)]))?;
    let best = clf.history.records[clf.history.best_epoch].val_f1;
    println!(
        "best validation F1 {best:.4} at epoch {}; test OA {:.4} F1 {:.4} Kappa {:.4}",
        clf.history.best_epoch,
        cm.overall_accuracy(),
        cm.f1(),
        cm.kappa()
    );
    Ok(())
}

/// Saves every `every`-th epoch through a [`CheckpointDir`].
struct EveryNth {
    dir: CheckpointDir,
    every: usize,
}

impl EpochObserver for EveryNth {
    fn on_epoch(&mut self, record: &EpochRecord, nets: &GanNetworks, config: &GanConfig) -> cropgan_core::Result<Option<PathBuf>> {
        if self.every > 0 && record.epoch.is_multiple_of(self.every) {
            let dir = self.dir.on_epoch(record, nets, config)?;
            // Recorded relative to the output directory so the history does
            // not depend on where the run was written.
            Ok(dir.map(|d| PathBuf::from("epochs").join(d.file_name().expect("epoch directory"))))
        } else {
            Ok(None)
        }
    }
}

pub fn train_cyclegan(a: &TrainGanArgs, run: &Run) -> anyhow::Result<()> {
    let source = load_dataset(&a.source)?;
    let target = load_dataset(&a.target)?;
    let config = GanConfig {
        alpha: a.alpha,
        beta: a.beta,
        sigma: a.sigma,
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        beta1: a.beta1,
        warmup_epochs: a.warmup,
        seed: a.seed,
        record_time: false,
    };
    config.validate()?;
    let mut observer = EveryNth {
        dir: CheckpointDir::new(run.path("epochs")).with_meta("config_hash", &run.config_hash),
        every: a.checkpoint_every,
    };
    let out = train_gan(&source, &target.without_labels(), &config, &mut observer)?;
    run.write("history.csv", out.history.to_csv())?;
    let selected_dir = run.path("selected");
    std::fs::create_dir_all(&selected_dir)?;
    let total = out.history.records[out.selected_epoch].total;
    for ck in out.selected.checkpoints(out.selected_epoch, a.seed) {
        let ck = ck.with_meta("total_loss", format_f64(total)).with_meta("config_hash", &run.config_hash);
        ck.save(&selected_dir.join(format!("{}.ckpt", ck.role().tag())))?;
    }
    run.write(
        "selection.txt",
        format!("selected_epoch = {}\ntotal_loss = {}\n", out.selected_epoch, format_f64(total)),
    )?;
    println!("selected epoch {} (total loss {total:.4}) of {}", out.selected_epoch, a.epochs);
    Ok(())
}

pub fn adapt(a: &AdaptArgs, run: &Run) -> anyhow::Result<()> {
    let g = load_role(&a.generator, Role::GeneratorG)?;
    let ds = load_dataset(&a.data)?;
    let adapted = transform_target(&g.network, &ds)?;
    adapted.save(&run.path("adapted.cgts"))?;
    println!("adapted {} samples", adapted.len());
    Ok(())
}

pub fn predict_dataset(a: &PredictArgs, run: &Run) -> anyhow::Result<()> {
    let ck = load_role(&a.classifier, Role::CropMapper)?;
    let ds = load_dataset(&a.data)?;
    let pred = predict(&ck.network, &ds)?;
    run.write("predictions.csv", pred.to_csv())?;
    let corn = pred.labels.iter().filter(|&&l| l == 1).count();
    println!("{} samples, {corn} predicted corn", pred.labels.len());
    Ok(())
}

/// Labels from either a dataset file or a predictions CSV.
fn load_truth(path: &Path) -> anyhow::Result<Vec<u8>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(b"CGTS") {
        let ds = load_dataset(path)?;
        Ok(ds.require_labels()?.to_vec())
    } else {
        Ok(load_predictions(path)?.labels)
    }
}

pub fn evaluate(a: &EvaluateArgs, run: &Run) -> anyhow::Result<()> {
    let truth = load_truth(&a.truth)?;
    let mut rows = vec![("baseline", confusion(&load_predictions(&a.baseline)?.labels, &truth)?)];
    if let Some(p) = &a.adapted {
        rows.push(("cropgan", confusion(&load_predictions(p)?.labels, &truth)?));
    }
    run.write("metrics.csv", metrics_csv(&rows))?;
    print!("{}", metrics_table(&rows));
    Ok(())
}

pub fn embed(a: &TsneArgs, run: &Run) -> anyhow::Result<()> {
    let classifier = match (a.features, &a.classifier) {
        (Features::Raw, _) => None,
        (Features::Classifier, Some(p)) => Some(load_role(p, Role::CropMapper)?),
        (Features::Classifier, None) => {
            return Err(cropgan_core::Error::Usage("--features classifier needs --classifier".into()).into())
        }
    };
    let mut points = Vec::new();
    let mut tags: Vec<(String, Option<u8>)> = Vec::new();
    for path in &a.data {
        let ds = load_dataset(path)?;
        let feats: Vec<Vec<f64>> = match &classifier {
            None => ds.samples.iter().map(|s| s.to_vec()).collect(),
            Some(ck) => {
                let out: Tensor = ck.network.predict_through(&cropgan_core::dataset::stack(&ds.samples), "FC 1")?;
                let width = out.shape()[1];
                out.data().chunks(width).map(<[f64]>::to_vec).collect()
            }
        };
        for (i, f) in feats.into_iter().enumerate() {
            points.push(f);
            tags.push((ds.domain.clone(), ds.labels.as_ref().map(|l| l[i])));
        }
    }
    let keep = subsample(points.len(), a.max_points.min(MAX_POINTS), a.seed);
    let picked: Vec<Vec<f64>> = keep.iter().map(|&i| points[i].clone()).collect();
    let config = TsneConfig {
        perplexity: a.perplexity,
        iterations: a.iterations,
        seed: a.seed,
        ..TsneConfig::default()
    };
    let result = tsne(&picked, &config)?;
    let mut csv = String::from("x,y,domain,class\n");
    for (&i, c) in keep.iter().zip(&result.coords) {
        let (domain, label) = &tags[i];
        let class = label.map_or(String::new(), |l| l.to_string());
        writeln!(csv, "{},{},{domain},{class}", format_f64(c[0]), format_f64(c[1])).unwrap();
    }
    run.write("embedding.csv", csv)?;
    run.write(
        "tsne_report.txt",
        format!(
            "points = {}\nkl_initial = {}\nkl_final = {}\n",
            keep.len(),
            format_f64(result.kl_initial),
            format_f64(result.kl_final)
        ),
    )?;
    println!("embedded {} points, KL {:.4} -> {:.4}", keep.len(), result.kl_initial, result.kl_final);
    Ok(())
}

pub fn render(a: &RenderArgs, run: &Run) -> anyhow::Result<()> {
    let pred = load_predictions(&a.predictions)?;
    let ds = load_dataset(&a.data)?;
    let Some(coords) = &ds.coords else {
        bail!(cropgan_core::Error::Usage(format!("{} has no pixel coordinates", a.data.display())));
    };
    if coords.len() != pred.labels.len() {
        bail!(cropgan_core::Error::Usage(format!(
            "{} predictions for {} samples",
            pred.labels.len(),
            coords.len()
        )));
    }
    let scene = match &a.scene {
        Some(dir) => Some(load_scene(dir).with_context(|| format!("loading scene {}", dir.display()))?),
        None => None,
    };
    let (width, height) = match &scene {
        Some(s) => (s.width, s.height),
        None => (
            coords.iter().map(|c| c.0 as usize + 1).max().unwrap_or(0),
            coords.iter().map(|c| c.1 as usize + 1).max().unwrap_or(0),
        ),
    };
    let raster = ClassRaster::from_points(width, height, coords, &pred.labels)?;
    run.write("map.ppm", render_map(&raster, &Palette::default())?)?;
    if let Some(truth) = scene.as_ref().and_then(|s| s.truth.as_ref()) {
        let mut t = ClassRaster::from_mask(width, height, truth)?;
        let cropland = &scene.as_ref().expect("scene").cropland;
        for (cell, &c) in t.cells.iter_mut().zip(cropland) {
            if c == 0 {
                *cell = None;
            }
        }
        run.write("truth.ppm", render_map(&t, &Palette::default())?)?;
        run.write("errors.ppm", render_error_map(&raster, &t)?)?;
    }
    println!("rendered {width}x{height} map of {} pixels", coords.len());
    Ok(())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn batch(a: &BatchArgs, run: &Run) -> anyhow::Result<()> {
    if a.seeds.is_empty() {
        bail!(cropgan_core::Error::Usage("--seeds is empty".into()));
    }
    let preset = Preset::from(a.preset);
    let mut csv = String::from(
        "seed,source_test_f1,direct_oa,direct_f1,direct_kappa,adapted_oa,adapted_f1,adapted_kappa,selected_epoch,f1_gain\n",
    );
    let mut gains = Vec::new();
    for &seed in &a.seeds {
        let mut config = BenchmarkConfig::new(preset, seed);
        config.n_per_class = a.n_per_class;
        config.classifier_epochs = a.classifier_epochs;
        config.gan.epochs = a.epochs;
        config.gan.warmup_epochs = a.warmup;
        let r = benchmark::run(&config)?;
        writeln!(
            csv,
            "{seed},{},{},{},{},{},{},{},{},{}",
            format_f64(r.source_test.f1),
            format_f64(r.direct.overall_accuracy),
            format_f64(r.direct.f1),
            format_f64(r.direct.kappa),
            format_f64(r.adapted.overall_accuracy),
            format_f64(r.adapted.f1),
            format_f64(r.adapted.kappa),
            r.selected_epoch,
            format_f64(r.f1_gain())
        )
        .unwrap();
        run.write(&format!("history_seed{seed}.csv"), r.gan.history.to_csv())?;
        println!(
            "seed {seed}: direct F1 {:.4}, adapted F1 {:.4} (epoch {}), gain {:+.4} in {:.0}s",
            r.direct.f1,
            r.adapted.f1,
            r.selected_epoch,
            r.f1_gain(),
            r.seconds
        );
        gains.push(r.f1_gain());
    }
    run.write("summary.csv", csv)?;
    let m = median(&mut gains);
    run.write("median.txt", format!("median_f1_gain = {}\n", format_f64(m)))?;
    println!("median F1 gain {m:+.4} over {} seeds", a.seeds.len());
    Ok(())
}
