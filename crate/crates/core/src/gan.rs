//! Cycle-consistent adversarial domain mapping.
//!
//! Domain X is the target (unlabeled) domain and Y the source domain.
//! Generator G maps X → Y, F maps Y → X; discriminator D_Y judges source
//! samples and D_X target samples. After training, G moves target samples
//! into the source domain where the source-trained classifier applies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Var};
use crate::checkpoint::Checkpoint;
use crate::dataset::{stack, unstack, LabeledDataset, SampleTensor};
use crate::error::{Error, Result};
use crate::networks::{build_discriminator, build_generator, Network, Role};
use crate::numfmt::format_f64;
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::Tensor;

/// Discriminator outputs are clamped to `[LOG_CLAMP, 1 − LOG_CLAMP]` before
/// taking logs.
pub const LOG_CLAMP: f64 = 1e-7;
const TRANSFORM_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanConfig {
    /// Weight of the adversarial terms.
    pub alpha: f64,
    /// Weight of the cycle-consistency terms.
    pub beta: f64,
    /// Weight of the identity terms.
    pub sigma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    /// Epochs excluded from model selection.
    pub warmup_epochs: usize,
    pub seed: u64,
    /// Record wall-clock seconds per epoch; off by default so that histories
    /// are reproducible byte for byte.
    pub record_time: bool,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            alpha: 1.0,
            beta: 10.0,
            sigma: 5.0,
            epochs: 300,
            batch_size: 64,
            learning_rate: 0.005,
            beta1: 0.5,
            warmup_epochs: 50,
            seed: 0,
            record_time: false,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.alpha, self.beta, self.sigma];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("loss weights must be finite and non-negative"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(Error::config(format!(
                "warmup_epochs ({}) must be smaller than epochs ({})",
                self.warmup_epochs, self.epochs
            )));
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig::with_learning_rate(self.learning_rate, self.beta1)
    }
}

/// The six loss terms of one generator step (or their epoch means).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    /// `−E[log D_Y(G(x))]`.
    pub adv_g: f64,
    /// `−E[log D_X(F(y))]`.
    pub adv_f: f64,
    /// `E|x − F(G(x))|`.
    pub cyc_x: f64,
    /// `E|y − G(F(y))|`.
    pub cyc_y: f64,
    /// `E|G(y) − y|`.
    pub id_g: f64,
    /// `E|F(x) − x|`.
    pub id_f: f64,
}

impl LossComponents {
    fn add_scaled(&mut self, o: &LossComponents, k: f64) {
        self.adv_g += k * o.adv_g;
        self.adv_f += k * o.adv_f;
        self.cyc_x += k * o.cyc_x;
        self.cyc_y += k * o.cyc_y;
        self.id_g += k * o.id_g;
        self.id_f += k * o.id_f;
    }
}

/// `α·(adv_g + adv_f) + β·(cyc_x + cyc_y) + σ·(id_g + id_f)`.
pub fn total_loss(c: &LossComponents, config: &GanConfig) -> f64 {
    config.alpha * (c.adv_g + c.adv_f) + config.beta * (c.cyc_x + c.cyc_y) + config.sigma * (c.id_g + c.id_f)
}

/// Discriminator objective `E[log D(real)] + E[log(1 − D(fake))]`, which the
/// discriminator maximizes.
pub fn adversarial_loss<D>(g: &mut Graph, mut disc: D, real: Var, fake: Var) -> Result<Var>
where
    D: FnMut(&mut Graph, Var) -> Result<Var>,
{
    let d_real = disc(g, real)?;
    let d_fake = disc(g, fake)?;
    for v in [d_real, d_fake] {
        if g.value(v).is_empty() {
            return Err(Error::usage("adversarial loss of an empty batch"));
        }
    }
    let r = g.clamp(d_real, LOG_CLAMP, 1.0 - LOG_CLAMP);
    let r = g.ln(r);
    let r = g.mean(r);
    let f = g.clamp(d_fake, LOG_CLAMP, 1.0 - LOG_CLAMP);
    let f = g.scale(f, -1.0);
    let f = g.add_scalar(f, 1.0);
    let f = g.ln(f);
    let f = g.mean(f);
    g.add(r, f)
}

/// Non-saturating generator objective `−E[log D(fake)]`, minimized by the
/// generator.
pub fn generator_adversarial_loss(g: &mut Graph, d_fake: Var) -> Var {
    let f = g.clamp(d_fake, LOG_CLAMP, 1.0 - LOG_CLAMP);
    let f = g.ln(f);
    let f = g.mean(f);
    g.scale(f, -1.0)
}

/// Per-element mean of `|x − back(forth(x))|`.
pub fn cycle_loss<G, F>(g: &mut Graph, forth: G, back: F, x: Var) -> Result<Var>
where
    G: FnOnce(&mut Graph, Var) -> Result<Var>,
    F: FnOnce(&mut Graph, Var) -> Result<Var>,
{
    let y = forth(g, x)?;
    let r = back(g, y)?;
    g.l1_mean(x, r)
}

/// Per-element mean of `|gen(y) − y|` for `y` already in `gen`'s output domain.
pub fn identity_loss<G>(g: &mut Graph, gen: G, y: Var) -> Result<Var>
where
    G: FnOnce(&mut Graph, Var) -> Result<Var>,
{
    let out = gen(g, y)?;
    g.l1_mean(out, y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 0-based.
    pub epoch: usize,
    pub losses: LossComponents,
    pub total: f64,
    pub seconds: f64,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

pub const HISTORY_HEADER: &str = "epoch,adv_g,adv_f,cyc_x,cyc_y,id_g,id_f,total,seconds";

impl TrainHistory {
    pub fn totals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{HISTORY_HEADER}\n");
        for r in &self.records {
            let l = &r.losses;
            let fields = [l.adv_g, l.adv_f, l.cyc_x, l.cyc_y, l.id_g, l.id_f, r.total, r.seconds];
            let joined: Vec<String> = fields.iter().map(|&v| format_f64(v)).collect();
            writeln!(s, "{},{}", r.epoch, joined.join(",")).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != HISTORY_HEADER {
            return Err(Error::format(0, format!("expected header '{HISTORY_HEADER}'")));
        }
        let mut offset = header.len() as u64 + 1;
        let mut records = Vec::new();
        for line in lines {
            let bad = || Error::format(offset, format!("malformed history row {line:?}"));
            if !line.trim().is_empty() {
                let f: Vec<&str> = line.split(',').map(str::trim).collect();
                if f.len() != 9 {
                    return Err(bad());
                }
                let epoch = f[0].parse().map_err(|_| bad())?;
                let v: Vec<f64> = f[1..].iter().map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()?;
                records.push(EpochRecord {
                    epoch,
                    losses: LossComponents {
                        adv_g: v[0],
                        adv_f: v[1],
                        cyc_x: v[2],
                        cyc_y: v[3],
                        id_g: v[4],
                        id_f: v[5],
                    },
                    total: v[6],
                    seconds: v[7],
                    checkpoint: None,
                });
            }
            offset += line.len() as u64 + 1;
        }
        Ok(TrainHistory { records })
    }
}

/// Index of the smallest total loss at or after `warmup`, earliest on ties.
pub fn select_model(totals: &[f64], warmup: usize) -> Result<usize> {
    if totals.len() <= warmup {
        return Err(Error::usage(format!(
            "history has {} epochs, model selection skips the first {warmup}",
            totals.len()
        )));
    }
    let mut best = warmup;
    for (i, &t) in totals.iter().enumerate().skip(warmup + 1) {
        if t < totals[best] {
            best = i;
        }
    }
    Ok(best)
}

/// The four networks being trained.
#[derive(Clone, Debug, PartialEq)]
pub struct GanNetworks {
    /// Target → source.
    pub g: Network,
    /// Source → target.
    pub f: Network,
    /// Judges target-domain samples.
    pub d_x: Network,
    /// Judges source-domain samples.
    pub d_y: Network,
}

impl GanNetworks {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut next = || rng.random::<u64>();
        GanNetworks {
            g: build_generator(Role::GeneratorG, next()).expect("generator role"),
            f: build_generator(Role::GeneratorF, next()).expect("generator role"),
            d_x: build_discriminator(Role::DiscriminatorX, next()).expect("discriminator role"),
            d_y: build_discriminator(Role::DiscriminatorY, next()).expect("discriminator role"),
        }
    }

    pub fn all(&self) -> [&Network; 4] {
        [&self.g, &self.f, &self.d_x, &self.d_y]
    }

    pub fn checkpoints(&self, epoch: usize, seed: u64) -> Vec<Checkpoint> {
        self.all()
            .into_iter()
            .map(|n| Checkpoint::new(n.clone(), epoch as u32).with_meta("seed", seed))
            .collect()
    }
}

/// Called after every epoch; may persist the networks and return where.
pub trait EpochObserver {
    fn on_epoch(&mut self, record: &EpochRecord, nets: &GanNetworks, config: &GanConfig) -> Result<Option<PathBuf>>;
}

/// Keeps nothing.
pub struct NoCheckpoints;

impl EpochObserver for NoCheckpoints {
    fn on_epoch(&mut self, _: &EpochRecord, _: &GanNetworks, _: &GanConfig) -> Result<Option<PathBuf>> {
        Ok(None)
    }
}

/// Writes `epoch_NNNN/<role>.ckpt` for all four networks under a directory.
pub struct CheckpointDir {
    pub root: PathBuf,
    /// Extra metadata stamped on every checkpoint.
    pub meta: Vec<(String, String)>,
}

impl CheckpointDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CheckpointDir {
            root: root.into(),
            meta: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn epoch_dir(root: &Path, epoch: usize) -> PathBuf {
        root.join(format!("epoch_{epoch:04}"))
    }

    pub fn file(root: &Path, epoch: usize, role: Role) -> PathBuf {
        Self::epoch_dir(root, epoch).join(format!("{}.ckpt", role.tag()))
    }
}

impl EpochObserver for CheckpointDir {
    fn on_epoch(&mut self, record: &EpochRecord, nets: &GanNetworks, config: &GanConfig) -> Result<Option<PathBuf>> {
        let dir = Self::epoch_dir(&self.root, record.epoch);
        std::fs::create_dir_all(&dir)?;
        for ck in nets.checkpoints(record.epoch, config.seed) {
            let mut ck = ck.with_meta("total_loss", format_f64(record.total));
            for (k, v) in &self.meta {
                ck = ck.with_meta(k, v);
            }
            ck.save(&dir.join(format!("{}.ckpt", ck.role().tag())))?;
        }
        Ok(Some(dir))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanOutcome {
    pub history: TrainHistory,
    /// Epoch chosen by [`select_model`].
    pub selected_epoch: usize,
    /// Networks as they were at the end of the selected epoch.
    pub selected: GanNetworks,
    /// Networks after the last epoch.
    pub last: GanNetworks,
}

fn take_batch(ds: &LabeledDataset, idx: &[usize]) -> Tensor {
    let samples: Vec<SampleTensor> = idx.iter().map(|&i| ds.samples[i]).collect();
    stack(&samples)
}

fn scalar(g: &Graph, v: Var) -> f64 {
    g.value(v).item().expect("scalar loss")
}

fn grads(g: &Graph, params: &[Var]) -> Vec<Tensor> {
    params.iter().map(|&v| g.grad_or_zeros(v)).collect()
}

/// One discriminator update on both discriminators; generators are frozen.
fn discriminator_step(
    nets: &mut GanNetworks,
    adam_x: &mut AdamState,
    adam_y: &mut AdamState,
    x: &Tensor,
    y: &Tensor,
) -> Result<f64> {
    let fake_y = nets.g.predict(x)?;
    let fake_x = nets.f.predict(y)?;
    let mut g = Graph::new();
    let px = nets.d_x.bind(&mut g, true);
    let py = nets.d_y.bind(&mut g, true);
    let (xv, yv) = (g.constant(x.clone()), g.constant(y.clone()));
    let (fxv, fyv) = (g.constant(fake_x), g.constant(fake_y));
    let d_x = &nets.d_x;
    let d_y = &nets.d_y;
    let obj_y = adversarial_loss(&mut g, |g, v| d_y.forward(g, &py, v), yv, fyv)?;
    let obj_x = adversarial_loss(&mut g, |g, v| d_x.forward(g, &px, v), xv, fxv)?;
    let obj = g.add(obj_x, obj_y)?;
    let loss = g.scale(obj, -1.0);
    let value = scalar(&g, loss);
    if value.is_finite() {
        g.backward(loss)?;
        adam_x.step(nets.d_x.params_mut(), &grads(&g, &px))?;
        adam_y.step(nets.d_y.params_mut(), &grads(&g, &py))?;
    }
    Ok(value)
}

/// One joint generator update; discriminators are frozen.
fn generator_step(
    nets: &mut GanNetworks,
    adam_g: &mut AdamState,
    adam_f: &mut AdamState,
    x: &Tensor,
    y: &Tensor,
    config: &GanConfig,
) -> Result<LossComponents> {
    let mut g = Graph::new();
    let pg = nets.g.bind(&mut g, true);
    let pf = nets.f.bind(&mut g, true);
    let pdx = nets.d_x.bind(&mut g, false);
    let pdy = nets.d_y.bind(&mut g, false);
    let (xv, yv) = (g.constant(x.clone()), g.constant(y.clone()));
    let (gen_g, gen_f) = (&nets.g, &nets.f);

    let fake_y = gen_g.forward(&mut g, &pg, xv)?;
    let fake_x = gen_f.forward(&mut g, &pf, yv)?;
    let dy_fake = nets.d_y.forward(&mut g, &pdy, fake_y)?;
    let dx_fake = nets.d_x.forward(&mut g, &pdx, fake_x)?;
    let adv_g = generator_adversarial_loss(&mut g, dy_fake);
    let adv_f = generator_adversarial_loss(&mut g, dx_fake);
    let rec_x = gen_f.forward(&mut g, &pf, fake_y)?;
    let rec_y = gen_g.forward(&mut g, &pg, fake_x)?;
    let cyc_x = g.l1_mean(xv, rec_x)?;
    let cyc_y = g.l1_mean(yv, rec_y)?;
    let id_g = identity_loss(&mut g, |g, v| gen_g.forward(g, &pg, v), yv)?;
    let id_f = identity_loss(&mut g, |g, v| gen_f.forward(g, &pf, v), xv)?;

    let adv = g.add(adv_g, adv_f)?;
    let adv = g.scale(adv, config.alpha);
    let cyc = g.add(cyc_x, cyc_y)?;
    let cyc = g.scale(cyc, config.beta);
    let id = g.add(id_g, id_f)?;
    let id = g.scale(id, config.sigma);
    let total = g.add(adv, cyc)?;
    let total = g.add(total, id)?;

    let losses = LossComponents {
        adv_g: scalar(&g, adv_g),
        adv_f: scalar(&g, adv_f),
        cyc_x: scalar(&g, cyc_x),
        cyc_y: scalar(&g, cyc_y),
        id_g: scalar(&g, id_g),
        id_f: scalar(&g, id_f),
    };
    if scalar(&g, total).is_finite() {
        g.backward(total)?;
        adam_g.step(nets.g.params_mut(), &grads(&g, &pg))?;
        adam_f.step(nets.f.params_mut(), &grads(&g, &pf))?;
    }
    Ok(losses)
}

/// Trains G, F, D_X and D_Y on unpaired target (`target`, domain X) and
/// source (`source`, domain Y) samples. Labels are ignored.
///
/// Each epoch reshuffles both domains and walks `min(|X|, |Y|) / batch`
/// full batches (the trailing partial batch is dropped; if a domain has
/// fewer samples than `batch_size`, the batch shrinks to fit). Every batch
/// performs one update of both discriminators and then one joint update of
/// both generators.
pub fn train_gan(
    source: &LabeledDataset,
    target: &LabeledDataset,
    config: &GanConfig,
    observer: &mut dyn EpochObserver,
) -> Result<GanOutcome> {
    config.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::usage("both domains need at least one sample"));
    }
    let mut nets = GanNetworks::new(config.seed);
    let adam = config.adam();
    let mut adam_g = AdamState::new(adam, nets.g.params());
    let mut adam_f = AdamState::new(adam, nets.f.params());
    let mut adam_dx = AdamState::new(adam, nets.d_x.params());
    let mut adam_dy = AdamState::new(adam, nets.d_y.params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xc1c1_e6a2);

    let batch = config.batch_size.min(source.len()).min(target.len());
    let n_batches = source.len().min(target.len()) / batch;
    let mut order_x: Vec<usize> = (0..target.len()).collect();
    let mut order_y: Vec<usize> = (0..source.len()).collect();
    let mut history = TrainHistory::default();
    let mut selected: Option<(usize, f64, GanNetworks)> = None;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        order_x.shuffle(&mut rng);
        order_y.shuffle(&mut rng);
        let mut sums = LossComponents::default();
        for b in 0..n_batches {
            let x = take_batch(target, &order_x[b * batch..(b + 1) * batch]);
            let y = take_batch(source, &order_y[b * batch..(b + 1) * batch]);
            let d_loss = discriminator_step(&mut nets, &mut adam_dx, &mut adam_dy, &x, &y)?;
            let losses = generator_step(&mut nets, &mut adam_g, &mut adam_f, &x, &y, config)?;
            let total = total_loss(&losses, config);
            if !d_loss.is_finite() || !total.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite loss at epoch {epoch}, batch {b} (discriminator {d_loss}, generator {total})"
                )));
            }
            sums.add_scaled(&losses, 1.0);
        }
        let mut losses = LossComponents::default();
        losses.add_scaled(&sums, 1.0 / n_batches as f64);
        let mut record = EpochRecord {
            epoch,
            losses,
            total: total_loss(&losses, config),
            seconds: if config.record_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
            checkpoint: None,
        };
        record.checkpoint = observer.on_epoch(&record, &nets, config)?;
        if epoch >= config.warmup_epochs && selected.as_ref().is_none_or(|(_, t, _)| record.total < *t) {
            selected = Some((epoch, record.total, nets.clone()));
        }
        history.records.push(record);
    }
    let (selected_epoch, _, selected) = selected.expect("warmup is shorter than training");
    Ok(GanOutcome {
        history,
        selected_epoch,
        selected,
        last: nets,
    })
}

/// Applies `map` to every sample in batches, clipping results to `[0, 1]`;
/// order, labels and coordinates pass through.
pub fn transform_with<M>(ds: &LabeledDataset, mut map: M) -> Result<LabeledDataset>
where
    M: FnMut(&Tensor) -> Result<Tensor>,
{
    let mut samples = Vec::with_capacity(ds.len());
    for chunk in ds.samples.chunks(TRANSFORM_CHUNK) {
        let out = map(&stack(chunk))?;
        if out.shape() != [chunk.len(), crate::TIMESTEPS, crate::BANDS, 1] {
            return Err(Error::dim(format!("mapping returned shape {:?}", out.shape())));
        }
        samples.extend(unstack(&out)?.iter().map(SampleTensor::clipped));
    }
    let mut out = ds.clone();
    out.samples = samples;
    Ok(out)
}

/// Moves target-domain samples into the source domain with the
/// target → source generator.
pub fn transform_target(generator: &Network, target: &LabeledDataset) -> Result<LabeledDataset> {
    if generator.role() != Role::GeneratorG {
        return Err(Error::usage(format!(
            "adaptation needs the target-to-source generator ({}), got {}",
            Role::GeneratorG,
            generator.role()
        )));
    }
    transform_with(target, |t| generator.predict(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_model_examples() {
        assert_eq!(select_model(&[9.0, 8.0, 3.0, 4.0, 5.0], 0).unwrap(), 2);
        assert_eq!(select_model(&[1.0, 9.0, 9.0, 9.0], 2).unwrap(), 2);
        assert!(matches!(select_model(&[1.0, 2.0], 2), Err(Error::Usage(_))));
    }

    #[test]
    fn total_loss_hand_case() {
        let c = LossComponents {
            adv_g: 1.5,
            adv_f: 0.5,
            cyc_x: 0.1,
            cyc_y: 0.2,
            id_g: 0.04,
            id_f: 0.06,
        };
        assert!((total_loss(&c, &GanConfig::default()) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn history_csv_round_trip() {
        let h = TrainHistory {
            records: vec![EpochRecord {
                epoch: 0,
                losses: LossComponents {
                    adv_g: 0.7,
                    adv_f: 0.69,
                    cyc_x: 0.1,
                    cyc_y: 1.0 / 3.0,
                    id_g: 0.2,
                    id_f: 0.3,
                },
                total: 7.0,
                seconds: 0.0,
                checkpoint: None,
            }],
        };
        assert_eq!(TrainHistory::from_csv(&h.to_csv()).unwrap(), h);
    }

    fn batch(seed: u64, n: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(&[n, crate::TIMESTEPS, crate::BANDS, 1], |_| rng.random::<f64>())
    }

    fn step_fixture() -> (GanNetworks, [AdamState; 4], Tensor, Tensor) {
        let nets = GanNetworks::new(3);
        let adam = GanConfig::default().adam();
        let states = [
            AdamState::new(adam, nets.g.params()),
            AdamState::new(adam, nets.f.params()),
            AdamState::new(adam, nets.d_x.params()),
            AdamState::new(adam, nets.d_y.params()),
        ];
        (nets, states, batch(1, 4), batch(2, 4))
    }

    #[test]
    fn discriminator_step_leaves_generators() {
        let (mut nets, [_, _, mut ax, mut ay], x, y) = step_fixture();
        let before = nets.clone();
        discriminator_step(&mut nets, &mut ax, &mut ay, &x, &y).unwrap();
        assert_eq!(nets.g, before.g);
        assert_eq!(nets.f, before.f);
        assert_ne!(nets.d_x, before.d_x);
        assert_ne!(nets.d_y, before.d_y);
    }

    #[test]
    fn generator_step_leaves_discriminators() {
        let (mut nets, [mut ag, mut af, _, _], x, y) = step_fixture();
        let before = nets.clone();
        let losses = generator_step(&mut nets, &mut ag, &mut af, &x, &y, &GanConfig::default()).unwrap();
        assert_eq!(nets.d_x, before.d_x);
        assert_eq!(nets.d_y, before.d_y);
        assert_ne!(nets.g, before.g);
        assert_ne!(nets.f, before.f);
        assert!(total_loss(&losses, &GanConfig::default()).is_finite());
    }

    #[test]
    fn warmup_must_leave_epochs() {
        let c = GanConfig {
            epochs: 5,
            warmup_epochs: 5,
            ..GanConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
