//! Property checks that report every violation instead of stopping at the
//! first, so the acceptance target can print one verdict per criterion.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cropgan_core::gan::{
    adversarial_loss, cycle_loss, identity_loss, select_model, total_loss, train_gan, GanConfig, GanOutcome,
    LossComponents, NoCheckpoints, TrainHistory,
};
use cropgan_core::metrics::{confusion, ConfusionMatrix};
use cropgan_core::preprocess::{composite, fill_gaps, CompositeSeries, Observation, PixelSeries, SceneStack, Windows};
use cropgan_core::synth::{make_domain, DomainShift, DomainSpec, Preset};
use cropgan_core::tsne::{conditional_affinities, joint_affinities, squared_distances, tsne, TsneConfig};
use cropgan_core::{Graph, Role, Tensor, BANDS, TIMESTEPS};

use super::oracles::{brute_composite, brute_metrics, brute_select};
use super::tables;

#[derive(Debug, Default)]
pub struct Report {
    pub failures: Vec<String>,
    pub checked: usize,
}

impl Report {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        if self.passed() {
            format!("{} checks", self.checked)
        } else {
            let shown: Vec<&str> = self.failures.iter().take(5).map(String::as_str).collect();
            format!("{} of {} checks failed: {}", self.failures.len(), self.checked, shown.join("; "))
        }
    }

    pub fn assert(&self) {
        assert!(self.passed(), "{}", self.summary());
    }
}

fn batch(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    Tensor::from_fn(&[n, TIMESTEPS, BANDS, 1], |_| rng.random::<f64>())
}

fn eval(g: &Graph, v: cropgan_core::Var) -> f64 {
    g.value(v).item().expect("scalar")
}

/// The 200-sample, 20-epoch run shared by the loss and selection checks.
pub struct SmokeRun {
    pub config: GanConfig,
    pub outcome: GanOutcome,
}

pub fn smoke_run() -> &'static SmokeRun {
    static RUN: OnceLock<SmokeRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let source = make_domain(&DomainSpec::new(100, DomainShift::default(), 40), "source").unwrap();
        let target = make_domain(&DomainSpec::new(100, Preset::CanadaLike.shift(), 41), "target").unwrap();
        let config = GanConfig {
            epochs: 20,
            warmup_epochs: 5,
            seed: 7,
            ..GanConfig::default()
        };
        let outcome = train_gan(&source, &target.without_labels(), &config, &mut NoCheckpoints).unwrap();
        SmokeRun { config, outcome }
    })
}

fn recomposed(c: &LossComponents, cfg: &GanConfig) -> f64 {
    // Written out rather than calling total_loss, so the check is independent.
    let adv = c.adv_g + c.adv_f;
    let cyc = c.cyc_x + c.cyc_y;
    let id = c.id_g + c.id_f;
    cfg.alpha * adv + cfg.beta * cyc + cfg.sigma * id
}

pub fn history_recomposes(history: &TrainHistory, config: &GanConfig, r: &mut Report) {
    for rec in &history.records {
        let want = recomposed(&rec.losses, config);
        r.check((rec.total - want).abs() <= 1e-12, || {
            format!("epoch {} total {} != weighted sum {}", rec.epoch, rec.total, want)
        });
    }
}

/// Cycle, identity and adversarial losses on stub maps with closed forms,
/// and the weighted total on every recorded epoch.
pub fn loss_identities() -> Report {
    let mut r = Report::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let n = 1 + trial % 7;
        let x = batch(&mut rng, n);

        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let cyc = cycle_loss(&mut g, |_, v| Ok(v), |_, v| Ok(v), xv).unwrap();
        let id = identity_loss(&mut g, |_, v| Ok(v), xv).unwrap();
        r.check(eval(&g, cyc).abs() <= 1e-12, || format!("identity cycle loss {}", eval(&g, cyc)));
        r.check(eval(&g, id).abs() <= 1e-12, || format!("identity map identity loss {}", eval(&g, id)));

        let c = rng.random_range(-0.5..0.5);
        let inv = cycle_loss(&mut g, |g, v| Ok(g.add_scalar(v, c)), |g, v| Ok(g.add_scalar(v, -c)), xv).unwrap();
        r.check(eval(&g, inv).abs() <= 1e-12, || format!("inverse pair cycle loss {}", eval(&g, inv)));

        let off = cycle_loss(&mut g, |_, v| Ok(v), |g, v| Ok(g.add_scalar(v, 0.1)), xv).unwrap();
        r.check((eval(&g, off) - 0.1).abs() <= 1e-12, || format!("F(y) = y + 0.1 cycle loss {}", eval(&g, off)));

        let halves = g.constant(Tensor::full(&[n, TIMESTEPS, BANDS, 1], 0.5));
        let zero = identity_loss(&mut g, |g, v| Ok(g.scale(v, 0.0)), halves).unwrap();
        r.check((eval(&g, zero) - 0.5).abs() <= 1e-12, || format!("G(y) = 0 identity loss {}", eval(&g, zero)));

        let y = g.constant(batch(&mut rng, n));
        let half = |g: &mut Graph, _: cropgan_core::Var| Ok(g.constant(Tensor::full(&[n, 1], 0.5)));
        let adv = adversarial_loss(&mut g, half, xv, y).unwrap();
        let want = 2.0 * 0.5f64.ln();
        r.check((eval(&g, adv) - want).abs() <= 1e-12, || format!("D = 0.5 adversarial loss {}", eval(&g, adv)));

        let mut calls = 0;
        let perfect = |g: &mut Graph, _: cropgan_core::Var| {
            calls += 1;
            let v = if calls == 1 { 1.0 - 1e-7 } else { 1e-7 };
            Ok(g.constant(Tensor::full(&[n, 1], v)))
        };
        let opt = adversarial_loss(&mut g, perfect, xv, y).unwrap();
        let want = 2.0 * (1.0 - 1e-7f64).ln();
        r.check((eval(&g, opt) - want).abs() <= 1e-12, || format!("perfect discriminator loss {}", eval(&g, opt)));
    }

    let cfg = GanConfig::default();
    let c = LossComponents {
        adv_g: 1.5,
        adv_f: 0.5,
        cyc_x: 0.1,
        cyc_y: 0.2,
        id_g: 0.04,
        id_f: 0.06,
    };
    r.check((total_loss(&c, &cfg) - 5.5).abs() <= 1e-12, || format!("hand total {}", total_loss(&c, &cfg)));
    let scaled = GanConfig {
        alpha: 3.0,
        beta: 30.0,
        sigma: 15.0,
        ..cfg
    };
    r.check((total_loss(&c, &scaled) - 16.5).abs() <= 1e-12, || "total is not linear in the weights".into());

    let smoke = smoke_run();
    history_recomposes(&smoke.outcome.history, &smoke.config, &mut r);
    let parsed = TrainHistory::from_csv(&smoke.outcome.history.to_csv()).unwrap();
    history_recomposes(&parsed, &smoke.config, &mut r);
    r
}

/// Library metrics against counting oracles on random label vectors.
pub fn metric_oracle() -> Report {
    let mut r = Report::default();
    let cm = ConfusionMatrix::new(45, 10, 5, 40);
    r.check((cm.overall_accuracy() - 0.85).abs() <= 1e-12, || format!("hand OA {}", cm.overall_accuracy()));
    r.check((cm.f1() - 0.857_142_857_142_857_1).abs() <= 1e-12, || format!("hand F1 {}", cm.f1()));
    r.check((cm.kappa() - 0.70).abs() <= 1e-12, || format!("hand kappa {}", cm.kappa()));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..1000 {
        let n = rng.random_range(1..=300);
        // Skewed rates so degenerate matrices turn up.
        let (pp, pt, agree) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let truth: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < pt)).collect();
        let pred: Vec<u8> = truth
            .iter()
            .map(|&t| if rng.random::<f64>() < agree { t } else { u8::from(rng.random::<f64>() < pp) })
            .collect();
        let cm = confusion(&pred, &truth).unwrap();
        let (oa, f1, kappa) = brute_metrics(&pred, &truth);
        for (name, got, want) in [("OA", cm.overall_accuracy(), oa), ("F1", cm.f1(), f1), ("kappa", cm.kappa(), kappa)] {
            r.check((got - want).abs() <= 1e-12, || format!("case {case}: {name} {got} vs oracle {want}"));
        }
    }
    r
}

fn random_stack(rng: &mut ChaCha8Rng) -> SceneStack {
    let (width, height) = (rng.random_range(1..=5), rng.random_range(1..=5));
    let n = width * height;
    let mut days = Vec::new();
    let mut day = rng.random_range(-5..3);
    while day < 95 {
        days.push(day);
        day += rng.random_range(1..6);
    }
    let cloud_rate = rng.random::<f64>() * 0.8;
    let observations = days
        .into_iter()
        .map(|day| Observation {
            day,
            bands: (0..BANDS * n).map(|_| rng.random_range(0..=10000)).collect(),
            cloud: (0..n).map(|_| u8::from(rng.random::<f64>() < cloud_rate)).collect(),
        })
        .collect();
    SceneStack {
        width,
        height,
        observations,
        cropland: (0..n).map(|_| u8::from(rng.random::<f64>() < 0.8)).collect(),
        truth: None,
        windows: Windows::default(),
    }
}

fn random_series(rng: &mut ChaCha8Rng, affine: bool) -> (CompositeSeries, Vec<[[f64; BANDS]; TIMESTEPS]>) {
    let count = rng.random_range(1..20);
    let mut pixels = Vec::new();
    let mut truths = Vec::new();
    for i in 0..count {
        let mut slots = [[None; BANDS]; TIMESTEPS];
        let mut truth = [[0.0; BANDS]; TIMESTEPS];
        for b in 0..BANDS {
            let (a, s) = (rng.random::<f64>(), rng.random_range(-0.1..0.1));
            for t in 0..TIMESTEPS {
                truth[t][b] = if affine { a + s * t as f64 } else { rng.random() };
                let keep = (affine && (t == 0 || t == TIMESTEPS - 1)) || rng.random::<f64>() < 0.5;
                slots[t][b] = keep.then_some(truth[t][b]);
            }
        }
        pixels.push(PixelSeries { x: i, y: 0, slots });
        truths.push(truth);
    }
    let series = CompositeSeries {
        width: count as usize,
        height: 1,
        pixels,
        non_cropland: 0,
        dropped: 0,
    };
    (series, truths)
}

/// Compositing against the per-pixel mean oracle, affine reconstruction,
/// idempotence and pixel accounting.
pub fn preprocessor_oracle() -> Report {
    let mut r = Report::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..300 {
        let stack = random_stack(&mut rng);
        let got = composite(&stack, &stack.windows).unwrap();
        let want = brute_composite(&stack);
        let slots: Vec<_> = got.pixels.iter().map(|p| p.slots).collect();
        r.check(slots == want, || format!("stack {case}: composite differs from the mean oracle"));
        let filled = fill_gaps(&got);
        let total = filled.pixels.len() + filled.dropped + filled.non_cropland;
        r.check(total == stack.width * stack.height, || {
            format!("stack {case}: {total} pixels accounted for out of {}", stack.width * stack.height)
        });
        r.check(fill_gaps(&filled) == filled, || format!("stack {case}: fill_gaps is not idempotent"));
    }
    for case in 0..300 {
        let (series, truth) = random_series(&mut rng, true);
        let filled = fill_gaps(&series);
        let worst = filled
            .pixels
            .iter()
            .zip(&truth)
            .flat_map(|(p, t)| p.slots.iter().flatten().zip(t.iter().flatten()).map(|(a, b)| (a.unwrap() - b).abs()))
            .fold(0.0, f64::max);
        r.check(filled.dropped == 0 && worst <= 1e-12, || format!("affine series {case}: error {worst:e}"));

        let (gappy, _) = random_series(&mut rng, false);
        let once = fill_gaps(&gappy);
        r.check(fill_gaps(&once) == once, || format!("series {case}: fill_gaps is not idempotent"));
        r.check(once.pixels.len() + once.dropped == gappy.pixels.len(), || format!("series {case}: pixels lost"));
    }
    r
}

/// Argmin-after-warmup on constructed histories, and the selected epoch of a
/// short training run against every post-warmup epoch.
pub fn model_selection() -> Report {
    let mut r = Report::default();
    r.check(select_model(&[9.0, 8.0, 3.0, 4.0, 5.0], 0).ok() == Some(2), || "[9,8,3,4,5] warmup 0".into());
    r.check(select_model(&[1.0, 9.0, 9.0, 9.0], 2).ok() == Some(2), || "[1,9,9,9] warmup 2".into());
    r.check(select_model(&[1.0, 2.0], 2).is_err(), || "history shorter than warmup accepted".into());

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..1000 {
        let len = rng.random_range(1..60);
        // Few distinct values, so ties are common.
        let totals: Vec<f64> = (0..len).map(|_| f64::from(rng.random_range(0..6u8))).collect();
        let warmup = rng.random_range(0..len);
        let got = select_model(&totals, warmup).unwrap();
        let want = brute_select(&totals, warmup);
        r.check(got == want, || format!("case {case}: selected {got}, oracle {want}"));
    }

    let smoke = smoke_run();
    let totals = smoke.outcome.history.totals();
    let warmup = smoke.config.warmup_epochs;
    let chosen = smoke.outcome.selected_epoch;
    r.check(select_model(&totals, warmup).ok() == Some(chosen), || {
        format!("training kept epoch {chosen}, history selects {:?}", select_model(&totals, warmup))
    });
    for (e, &t) in totals.iter().enumerate().skip(warmup) {
        r.check(totals[chosen] <= t, || format!("selected total {} exceeds epoch {e} total {t}", totals[chosen]));
    }
    r.check(totals[chosen] < totals[0], || {
        format!("selected total {} is not below the first epoch's {}", totals[chosen], totals[0])
    });
    r
}

fn mean_pairwise(points: &[[f64; 2]]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            sum += ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt();
            count += 1.0;
        }
    }
    sum / count
}

fn centroid(points: &[[f64; 2]]) -> [f64; 2] {
    let n = points.len() as f64;
    let s = points.iter().fold([0.0; 2], |a, p| [a[0] + p[0], a[1] + p[1]]);
    [s[0] / n, s[1] / n]
}

/// Bandwidth search, affinity normalization, KL descent and cluster
/// separation.
pub fn tsne_suite() -> Report {
    let mut r = Report::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..5 {
        let n = rng.random_range(40..100);
        let dim = rng.random_range(2..20);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let perplexity = rng.random_range(5.0..(n as f64 - 1.0) / 3.0);
        let d = squared_distances(&points);
        let cond = conditional_affinities(&d, n, perplexity);
        for (i, &reached) in cond.perplexity.iter().enumerate() {
            r.check((reached - perplexity).abs() <= 1e-3, || format!("case {case} point {i}: perplexity {reached}"));
            let row: f64 = cond.p[i * n..(i + 1) * n].iter().sum();
            r.check((row - 1.0).abs() <= 1e-10, || format!("case {case} row {i} sums to {row}"));
        }
        let p = joint_affinities(&cond, n);
        let total: f64 = p.iter().sum();
        r.check((total - 1.0).abs() <= 1e-10, || format!("case {case}: P sums to {total}"));
        let asym = (0..n * n).map(|k| (p[k] - p[(k % n) * n + k / n]).abs()).fold(0.0, f64::max);
        r.check(asym <= 1e-10, || format!("case {case}: P asymmetry {asym:e}"));
        r.check(p.iter().all(|&v| v >= 0.0), || format!("case {case}: negative affinity"));

        let config = TsneConfig {
            perplexity,
            seed: case,
            ..TsneConfig::default()
        };
        let out = tsne(&points, &config).unwrap();
        r.check(out.kl_final < out.kl_initial, || {
            format!("case {case}: KL {} did not drop below {}", out.kl_final, out.kl_initial)
        });
    }

    let per = 40;
    let mut points = Vec::new();
    for c in 0..2 {
        for _ in 0..per {
            let normal = rand_distr::Normal::new(3.0 * c as f64, 1.0).unwrap();
            points.push((0..54).map(|_| rng.sample(normal)).collect::<Vec<f64>>());
        }
    }
    let config = TsneConfig {
        perplexity: 15.0,
        seed: 1,
        ..TsneConfig::default()
    };
    let out = tsne(&points, &config).unwrap();
    let (a, b) = out.coords.split_at(per);
    let (ca, cb) = (centroid(a), centroid(b));
    let between = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2)).sqrt();
    let within = (mean_pairwise(a) + mean_pairwise(b)) / 2.0;
    r.check(between > 3.0 * within, || format!("clusters {between:.3} apart, within-cluster {within:.3}"));
    r.check(out.kl_final < out.kl_initial, || "two-cluster KL did not decrease".into());
    r
}

/// Every network's per-stage output shapes against the transcribed tables.
pub fn shape_contract() -> Report {
    let mut r = Report::default();
    for role in Role::ALL {
        let want = match role {
            Role::GeneratorG | Role::GeneratorF => tables::GENERATOR,
            Role::DiscriminatorX | Role::DiscriminatorY => tables::DISCRIMINATOR,
            Role::CropMapper => tables::CROP_MAPPER,
        };
        let trace = cropgan_core::networks::build(role, 7).shape_trace().unwrap();
        let got: Vec<(&str, &[usize])> = trace.iter().map(|(n, s)| (*n, s.as_slice())).collect();
        r.check(got == want, || format!("{role}: traced {got:?}"));
    }
    r
}
