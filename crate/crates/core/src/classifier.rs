//! Crop-mapper training on labeled source data, and inference.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Var};
use crate::checkpoint::Checkpoint;
use crate::dataset::{stack, LabeledDataset, SampleTensor};
use crate::error::{Error, Result};
use crate::metrics::confusion;
use crate::networks::{build_crop_mapper, Network, Role};
use crate::numfmt::format_f64;
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::Tensor;

/// Probability at or above which a sample is labeled corn.
pub const DECISION_THRESHOLD: f64 = 0.5;
/// Probabilities are clamped to `[CLAMP, 1 − CLAMP]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-7;
/// Samples per inference batch.
const PREDICT_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            train_fraction: 0.70,
            validation_fraction: 0.15,
            test_fraction: 0.15,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_fraction, self.validation_fraction, self.test_fraction];
        if fr.iter().any(|&f| !(0.0..=1.0).contains(&f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("split fractions {fr:?} must be in [0, 1] and sum to 1")));
        }
        Ok(())
    }

    /// `(train, validation, test)` sizes for `n` samples: the training share
    /// is rounded down and the remainder is divided between validation and
    /// test in proportion, validation taking any odd element.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = (self.train_fraction * n as f64 + 1e-9).floor() as usize;
        let rest = n - train;
        let held = self.validation_fraction + self.test_fraction;
        let test = if held > 0.0 {
            ((self.test_fraction / held) * rest as f64 + 1e-9).floor() as usize
        } else {
            0
        };
        (train, rest - test, test)
    }
}

/// Seeded partition into train, validation and test sets.
pub fn split_dataset(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    ds.require_labels()?;
    if ds.len() < 7 {
        return Err(Error::usage(format!("splitting needs at least 7 samples, got {}", ds.len())));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (a, b, _) = spec.sizes(ds.len());
    Ok((ds.subset(&idx[..a]), ds.subset(&idx[a..a + b]), ds.subset(&idx[a + b..])))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl ClassifierConfig {
    pub fn new(seed: u64) -> Self {
        ClassifierConfig {
            epochs: 100,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size < 2 {
            return Err(Error::config("epochs must be positive and batch_size at least 2"));
        }
        self.adam.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierEpoch {
    /// 0-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHistory {
    pub records: Vec<ClassifierEpoch>,
    /// Epoch of the returned network.
    pub best_epoch: usize,
}

impl ClassifierHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_f1\n");
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{}",
                r.epoch,
                format_f64(r.train_loss),
                format_f64(r.val_loss),
                format_f64(r.val_f1)
            )
            .unwrap();
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedClassifier {
    pub checkpoint: Checkpoint,
    pub history: ClassifierHistory,
}

/// Mean binary cross-entropy of probabilities `p` against 0/1 `labels`.
pub fn binary_cross_entropy(g: &mut Graph, p: Var, labels: &[u8]) -> Result<Var> {
    let shape = g.value(p).shape().to_vec();
    let y = Tensor::new(shape.clone(), labels.iter().map(|&l| f64::from(l)).collect())?;
    let not_y = y.map(|v| 1.0 - v);
    let y = g.constant(y);
    let not_y = g.constant(not_y);
    let pc = g.clamp(p, LOG_CLAMP, 1.0 - LOG_CLAMP);
    let log_p = g.ln(pc);
    let neg = g.scale(pc, -1.0);
    let one_minus = g.add_scalar(neg, 1.0);
    let log_q = g.ln(one_minus);
    let a = g.mul(y, log_p)?;
    let b = g.mul(not_y, log_q)?;
    let s = g.add(a, b)?;
    let m = g.mean(s);
    Ok(g.scale(m, -1.0))
}

fn batches(n: usize, batch_size: usize, order: &[usize]) -> Vec<&[usize]> {
    if n <= batch_size {
        return vec![order];
    }
    order.chunks(batch_size).filter(|c| c.len() >= 2).collect()
}

fn gather(ds: &LabeledDataset, labels: &[u8], idx: &[usize]) -> (Vec<SampleTensor>, Vec<u8>) {
    (idx.iter().map(|&i| ds.samples[i]).collect(), idx.iter().map(|&i| labels[i]).collect())
}

/// Validation loss and F1 of `net` in inference mode.
fn evaluate(net: &Network, ds: &LabeledDataset) -> Result<(f64, f64)> {
    let labels = ds.require_labels()?;
    let pred = predict(net, ds)?;
    let loss = pred
        .probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &l)| {
            let p = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
            if l != 0 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / labels.len() as f64;
    Ok((loss, confusion(&pred.labels, labels)?.f1()))
}

/// Trains the crop mapper with binary cross-entropy and returns the network
/// from the epoch with the best validation F1 (earliest on ties).
pub fn train_classifier(
    train: &LabeledDataset,
    validation: &LabeledDataset,
    config: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    config.validate()?;
    let train_labels = train.require_labels()?;
    validation.require_labels()?;
    if train.len() < 2 || validation.is_empty() {
        return Err(Error::usage("training needs at least 2 samples and a non-empty validation set"));
    }
    let mut net = build_crop_mapper(config.seed);
    let mut adam = AdamState::new(config.adam, net.params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_c1a5);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Network)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for (bi, idx) in batches(train.len(), config.batch_size, &order).into_iter().enumerate() {
            let (xs, ys) = gather(train, train_labels, idx);
            let mut g = Graph::new();
            let params = net.bind(&mut g, true);
            let x = g.constant(stack(&xs));
            let p = net.forward_train(&mut g, &params, x)?;
            let loss = binary_cross_entropy(&mut g, p, &ys)?;
            let value = g.value(loss).item().expect("scalar loss");
            if !value.is_finite() {
                return Err(Error::Divergence(format!(
                    "classifier loss is {value} at epoch {epoch}, batch {bi}"
                )));
            }
            g.backward(loss)?;
            let grads: Vec<Tensor> = params.iter().map(|&v| g.grad_or_zeros(v)).collect();
            adam.step(net.params_mut(), &grads)?;
            loss_sum += value * idx.len() as f64;
            seen += idx.len();
        }
        let (val_loss, val_f1) = evaluate(&net, validation)?;
        records.push(ClassifierEpoch {
            epoch,
            train_loss: loss_sum / seen as f64,
            val_loss,
            val_f1,
        });
        if best.as_ref().is_none_or(|(f1, _, _)| val_f1 > *f1) {
            best = Some((val_f1, epoch, net.clone()));
        }
    }
    let (val_f1, best_epoch, network) = best.expect("at least one epoch");
    let checkpoint = Checkpoint::new(network, best_epoch as u32)
        .with_meta("seed", config.seed)
        .with_meta("val_f1", format_f64(val_f1));
    Ok(TrainedClassifier {
        checkpoint,
        history: ClassifierHistory { records, best_epoch },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Prediction {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,probability,label\n");
        for (i, (p, l)) in self.probabilities.iter().zip(&self.labels).enumerate() {
            writeln!(s, "{i},{},{l}", format_f64(*p)).unwrap();
        }
        s
    }

    /// Parses the CSV written by [`Prediction::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut offset = 0u64;
        match lines.next() {
            Some(h) if h.trim() == "index,probability,label" => offset += h.len() as u64 + 1,
            _ => return Err(Error::format(0, "expected header 'index,probability,label'")),
        }
        let mut out = Prediction {
            probabilities: Vec::new(),
            labels: Vec::new(),
        };
        for line in lines {
            if line.trim().is_empty() {
                offset += line.len() as u64 + 1;
                continue;
            }
            let bad = || Error::format(offset, format!("malformed prediction row {line:?}"));
            let mut f = line.split(',');
            let (Some(i), Some(p), Some(l), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(bad());
            };
            let i: usize = i.trim().parse().map_err(|_| bad())?;
            if i != out.labels.len() {
                return Err(bad());
            }
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let l: u8 = l.trim().parse().map_err(|_| bad())?;
            if l > 1 {
                return Err(bad());
            }
            out.probabilities.push(p);
            out.labels.push(l);
            offset += line.len() as u64 + 1;
        }
        Ok(out)
    }
}

/// Corn probabilities and thresholded labels for every sample.
pub fn predict(net: &Network, ds: &LabeledDataset) -> Result<Prediction> {
    if net.role() != Role::CropMapper {
        return Err(Error::usage(format!("prediction needs a crop-mapper network, got {}", net.role())));
    }
    let mut probabilities = Vec::with_capacity(ds.len());
    for chunk in ds.samples.chunks(PREDICT_CHUNK) {
        let out = net.predict(&stack(chunk))?;
        probabilities.extend_from_slice(out.data());
    }
    let labels = probabilities.iter().map(|&p| u8::from(p >= DECISION_THRESHOLD)).collect();
    Ok(Prediction { probabilities, labels })
}
