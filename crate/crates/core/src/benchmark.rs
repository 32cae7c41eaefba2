//! End-to-end synthetic adaptation run: a classifier trained on the source
//! domain, scored on a shifted target directly and after the target has been
//! mapped into the source domain.

use std::time::Instant;

use crate::classifier::{predict, split_dataset, train_classifier, ClassifierConfig, SplitSpec};
use crate::error::Result;
use crate::gan::{train_gan, transform_target, GanConfig, GanOutcome, NoCheckpoints};
use crate::metrics::{score, Scores};
use crate::synth::{make_domain, DomainShift, DomainSpec, Preset};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub preset: Preset,
    /// Samples per class in each domain.
    pub n_per_class: usize,
    pub gan: GanConfig,
    pub classifier_epochs: usize,
    pub seed: u64,
}

impl BenchmarkConfig {
    pub fn new(preset: Preset, seed: u64) -> Self {
        BenchmarkConfig {
            preset,
            n_per_class: 1000,
            gan: GanConfig {
                seed,
                ..GanConfig::default()
            },
            classifier_epochs: ClassifierConfig::new(seed).epochs,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkResult {
    /// Held-out source split.
    pub source_test: Scores,
    /// Classifier applied to the raw target.
    pub direct: Scores,
    /// Classifier applied to the target mapped by the selected generator.
    pub adapted: Scores,
    pub selected_epoch: usize,
    pub gan: GanOutcome,
    pub seconds: f64,
}

impl BenchmarkResult {
    pub fn f1_gain(&self) -> f64 {
        self.adapted.f1 - self.direct.f1
    }
}

/// Source and target domains of one run; the target keeps its labels for
/// scoring only.
pub fn domains(config: &BenchmarkConfig) -> Result<(crate::LabeledDataset, crate::LabeledDataset)> {
    let s = config.seed;
    let source = make_domain(&DomainSpec::new(config.n_per_class, DomainShift::default(), s * 2), "source")?;
    let target = make_domain(&DomainSpec::new(config.n_per_class, config.preset.shift(), s * 2 + 1), "target")?;
    Ok((source, target))
}

pub fn run(config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    let started = Instant::now();
    let (source, target) = domains(config)?;
    let (train, val, test) = split_dataset(&source, &SplitSpec::new(config.seed))?;
    let clf_config = ClassifierConfig {
        epochs: config.classifier_epochs,
        ..ClassifierConfig::new(config.seed)
    };
    let clf = train_classifier(&train, &val, &clf_config)?;
    let net = &clf.checkpoint.network;
    let truth = target.require_labels()?;
    let source_test = score(&predict(net, &test)?.labels, test.require_labels()?)?;
    let direct = score(&predict(net, &target)?.labels, truth)?;

    let gan = train_gan(&source, &target.without_labels(), &config.gan, &mut NoCheckpoints)?;
    let adapted_target = transform_target(&gan.selected.g, &target)?;
    let adapted = score(&predict(net, &adapted_target)?.labels, truth)?;
    Ok(BenchmarkResult {
        source_test,
        direct,
        adapted,
        selected_epoch: gan.selected_epoch,
        gan,
        seconds: started.elapsed().as_secs_f64(),
    })
}
