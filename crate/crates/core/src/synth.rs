//! Synthetic domain-shifted crop time series.
//!
//! Greenness follows a double-logistic season curve per class. Each sample
//! draws its own season timing and amplitude around the class means, the
//! domain shift moves the whole calendar and scales the amplitude, and the
//! six bands are synthesized so that the clean NIR/Red pair reproduces the
//! curve's NDVI exactly.
//!
//! The model is deliberately simple: it stands in for real imagery when
//! testing whether adaptation recovers accuracy lost to calendar shifts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{LabeledDataset, SampleTensor, BANDS, NIR, RED, TIMESTEPS};
use crate::error::{Error, Result};
use crate::preprocess::{Observation, SceneStack, Windows, MAX_RAW, REFLECTANCE_SCALE};

/// Double-logistic season curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhenologyParams {
    pub base: f64,
    pub amplitude: f64,
    /// Start of season (day of the rising inflection).
    pub t_sos: f64,
    /// End of season (day of the falling inflection).
    pub t_eos: f64,
    pub k1: f64,
    pub k2: f64,
}

impl PhenologyParams {
    pub fn corn() -> Self {
        PhenologyParams {
            base: 0.15,
            amplitude: 0.65,
            t_sos: 35.0,
            t_eos: 110.0,
            k1: 0.15,
            k2: 0.12,
        }
    }

    pub fn other() -> Self {
        PhenologyParams {
            base: 0.15,
            amplitude: 0.45,
            t_sos: 15.0,
            t_eos: 95.0,
            k1: 0.12,
            k2: 0.10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.amplitude >= 0.0
            && self.t_sos < self.t_eos
            && self.k1 > 0.0
            && self.k2 > 0.0
            && self.base >= 0.0
            && self.base + self.amplitude <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid phenology parameters {self:?}")))
        }
    }

    /// The same season moved by `days`.
    pub fn shifted(&self, days: f64) -> Self {
        PhenologyParams {
            t_sos: self.t_sos + days,
            t_eos: self.t_eos + days,
            ..*self
        }
    }

    pub fn scaled(&self, amplitude_scale: f64) -> Self {
        PhenologyParams {
            amplitude: self.amplitude * amplitude_scale,
            ..*self
        }
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// NDVI on day `t`.
pub fn phenology_curve(p: &PhenologyParams, t: f64) -> f64 {
    p.base + p.amplitude * (logistic(p.k1 * (t - p.t_sos)) - logistic(p.k2 * (t - p.t_eos)))
}

/// Calendar and magnitude change between two domains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainShift {
    /// Signed shift of the season; negative means earlier.
    pub day_shift: f64,
    pub amplitude_scale: f64,
    pub noise_std: f64,
}

impl Default for DomainShift {
    fn default() -> Self {
        DomainShift {
            day_shift: 0.0,
            amplitude_scale: 1.0,
            noise_std: DEFAULT_NOISE,
        }
    }
}

pub const DEFAULT_NOISE: f64 = 0.02;

impl DomainShift {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_scale > 0.0 && self.amplitude_scale <= 2.0) {
            return Err(Error::config("amplitude_scale must lie in (0, 2]"));
        }
        if !(self.day_shift.abs() <= 45.0) {
            return Err(Error::config("|day_shift| must not exceed 45 days"));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::config("noise_std must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Named target-domain shifts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    CrossYear,
    ChinaLike,
    CanadaLike,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::CrossYear, Preset::ChinaLike, Preset::CanadaLike];

    pub fn name(self) -> &'static str {
        match self {
            Preset::CrossYear => "cross-year",
            Preset::ChinaLike => "china-like",
            Preset::CanadaLike => "canada-like",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn shift(self) -> DomainShift {
        let (day_shift, amplitude_scale) = match self {
            Preset::CrossYear => (-10.0, 1.0),
            Preset::ChinaLike => (-10.0, 1.15),
            Preset::CanadaLike => (-30.0, 1.0),
        };
        DomainShift {
            day_shift,
            amplitude_scale,
            noise_std: DEFAULT_NOISE,
        }
    }
}

/// Reflectance model mapping an NDVI value to six bands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandModel {
    /// NIR + Red.
    pub brightness: f64,
}

impl Default for BandModel {
    fn default() -> Self {
        BandModel { brightness: 0.8 }
    }
}

impl BandModel {
    /// Noise-free bands for one NDVI value.
    pub fn clean(&self, ndvi: f64) -> [f64; BANDS] {
        let s = self.brightness;
        let visible = 0.1 - 0.05 * ndvi;
        let swir = (0.3 - 0.2 * ndvi).clamp(0.0, 1.0);
        let mut b = [visible, visible, 0.0, 0.0, swir, swir];
        b[NIR] = s * (1.0 + ndvi) / 2.0;
        b[RED] = s * (1.0 - ndvi) / 2.0;
        b
    }
}

/// Bands for `ndvi` with additive Gaussian noise, clipped to `[0, 1]`.
pub fn synth_bands<R: Rng + ?Sized>(model: &BandModel, ndvi: f64, rng: &mut R, noise_std: f64) -> [f64; BANDS] {
    let mut b = model.clean(ndvi);
    if noise_std > 0.0 {
        let noise = Normal::new(0.0, noise_std).expect("finite std");
        for v in b.iter_mut() {
            *v += noise.sample(rng);
        }
    }
    b.map(|v| v.clamp(0.0, 1.0))
}

/// Per-sample spread around the class curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jitter {
    /// Standard deviation of the season timing, in days.
    pub day_std: f64,
    /// Standard deviation of the amplitude.
    pub amplitude_std: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter {
            day_std: 4.0,
            amplitude_std: 0.05,
        }
    }
}

impl Jitter {
    pub const NONE: Jitter = Jitter {
        day_std: 0.0,
        amplitude_std: 0.0,
    };

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let d = self.day_std * std.sample(rng);
        let a = self.amplitude_std * std.sample(rng);
        (d, a)
    }
}

/// Everything needed to generate one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub n_per_class: usize,
    pub corn: PhenologyParams,
    pub other: PhenologyParams,
    pub shift: DomainShift,
    pub windows: Windows,
    pub jitter: Jitter,
    pub bands: BandModel,
    pub seed: u64,
}

impl DomainSpec {
    pub fn new(n_per_class: usize, shift: DomainShift, seed: u64) -> Self {
        DomainSpec {
            n_per_class,
            corn: PhenologyParams::corn(),
            other: PhenologyParams::other(),
            shift,
            windows: Windows::default(),
            jitter: Jitter::default(),
            bands: BandModel::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.corn.validate()?;
        self.other.validate()?;
        self.shift.validate()?;
        self.windows.validate()?;
        if self.jitter.day_std < 0.0 || self.jitter.amplitude_std < 0.0 {
            return Err(Error::config("jitter must be non-negative"));
        }
        Ok(())
    }

    /// Class curve after the domain shift, before per-sample jitter.
    pub fn class_params(&self, label: u8) -> PhenologyParams {
        let p = if label == 1 { self.corn } else { self.other };
        p.shifted(self.shift.day_shift).scaled(self.shift.amplitude_scale)
    }

    fn sample_params<R: Rng + ?Sized>(&self, label: u8, rng: &mut R) -> PhenologyParams {
        let (d, a) = self.jitter.draw(rng);
        let mut p = self.class_params(label).shifted(d);
        p.amplitude = (p.amplitude + a).max(0.0);
        p
    }
}

/// Largest NDVI fed to the band model; keeps Red strictly positive.
const NDVI_CEILING: f64 = 0.99;

fn ndvi_at(p: &PhenologyParams, t: f64) -> f64 {
    phenology_curve(p, t).clamp(0.0, NDVI_CEILING)
}

/// Balanced, labeled domain: corn and other samples alternate.
pub fn make_domain(spec: &DomainSpec, domain: &str) -> Result<LabeledDataset> {
    spec.validate()?;
    if spec.n_per_class == 0 {
        return Err(Error::config("n_per_class must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let midpoints = spec.windows.midpoints();
    let n = 2 * spec.n_per_class;
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = u8::from(i % 2 == 0);
        let p = spec.sample_params(label, &mut rng);
        let mut s = SampleTensor::zeros();
        for (t, row) in s.0.iter_mut().enumerate() {
            *row = synth_bands(&spec.bands, ndvi_at(&p, midpoints[t]), &mut rng, spec.shift.noise_std);
        }
        samples.push(s);
        labels.push(label);
    }
    LabeledDataset::new(samples, Some(labels), domain)
}

/// Layout of a synthetic scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub field_size: usize,
    pub corn_fraction: f64,
    /// Width of the non-cropland frame around the scene, in pixels.
    pub border: usize,
    pub cloud_gap_prob: f64,
    /// Days between consecutive acquisitions.
    pub revisit: i32,
    pub domain: DomainSpec,
}

impl SceneSpec {
    pub fn new(width: usize, height: usize, field_size: usize, domain: DomainSpec) -> Self {
        SceneSpec {
            width,
            height,
            field_size,
            corn_fraction: 0.5,
            border: 1,
            cloud_gap_prob: 0.0,
            revisit: 5,
            domain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("scene must have at least one pixel"));
        }
        if self.field_size == 0 || !self.width.is_multiple_of(self.field_size) || !self.height.is_multiple_of(self.field_size) {
            return Err(Error::config(format!(
                "field size {} must divide the scene size {}x{}",
                self.field_size, self.width, self.height
            )));
        }
        if !(0.0..=1.0).contains(&self.corn_fraction) {
            return Err(Error::config("corn_fraction must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.cloud_gap_prob) {
            return Err(Error::config("cloud_gap_prob must lie in [0, 1]"));
        }
        if self.revisit <= 0 {
            return Err(Error::config("revisit interval must be positive"));
        }
        Ok(())
    }

    /// Acquisition days: every `revisit` days across the composite windows.
    pub fn days(&self) -> Vec<i32> {
        let w = &self.domain.windows;
        let first = w.starts[0];
        let end = w.starts[TIMESTEPS - 1] + w.len;
        (first..end).step_by(self.revisit as usize).collect()
    }
}

/// A generated scene plus the per-pixel composites it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub stack: SceneStack,
    /// Per-window mean of the unquantized, cloud-free reflectance, one per
    /// pixel in row-major order.
    pub reference: Vec<SampleTensor>,
}

/// Reflectance of a cloudy acquisition.
const CLOUD_REFLECTANCE: f64 = 0.8;

/// Tiles the scene into square fields, assigns each field a class, and
/// renders every acquisition from the field's curve plus per-pixel noise.
pub fn make_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let d = &spec.domain;
    let (w, h, fs) = (spec.width, spec.height, spec.field_size);
    let n = w * h;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);

    let fields_x = w / fs;
    let n_fields = fields_x * (h / fs);
    let n_corn = (spec.corn_fraction * n_fields as f64).round() as usize;
    let mut order: Vec<usize> = (0..n_fields).collect();
    order.shuffle(&mut rng);
    let mut field_label = vec![0u8; n_fields];
    for &f in &order[..n_corn] {
        field_label[f] = 1;
    }
    let field_params: Vec<PhenologyParams> = field_label.iter().map(|&l| d.sample_params(l, &mut rng)).collect();
    let field_of = |p: usize| (p / w / fs) * fields_x + (p % w) / fs;

    let days = spec.days();
    let mut observations = Vec::with_capacity(days.len());
    let mut sums = vec![[[0.0; BANDS]; TIMESTEPS]; n];
    let mut counts = [0u32; TIMESTEPS];
    for &day in &days {
        let slot = d.windows.slot(day);
        if let Some(t) = slot {
            counts[t] += 1;
        }
        let mut bands = vec![0u16; BANDS * n];
        let mut cloud = vec![0u8; n];
        for p in 0..n {
            let clean = synth_bands(&d.bands, ndvi_at(&field_params[field_of(p)], day as f64), &mut rng, d.shift.noise_std);
            if let Some(t) = slot {
                for b in 0..BANDS {
                    sums[p][t][b] += clean[b];
                }
            }
            let cloudy = spec.cloud_gap_prob > 0.0 && rng.random::<f64>() < spec.cloud_gap_prob;
            cloud[p] = u8::from(cloudy);
            let values = if cloudy { [CLOUD_REFLECTANCE; BANDS] } else { clean };
            for b in 0..BANDS {
                bands[b * n + p] = ((values[b] * REFLECTANCE_SCALE).round() as u16).min(MAX_RAW);
            }
        }
        observations.push(Observation { day, bands, cloud });
    }
    if counts.contains(&0) {
        return Err(Error::config("some composite window receives no acquisition"));
    }
    let reference = sums
        .iter()
        .map(|s| {
            let mut out = SampleTensor::zeros();
            for t in 0..TIMESTEPS {
                for b in 0..BANDS {
                    out.0[t][b] = s[t][b] / f64::from(counts[t]);
                }
            }
            out
        })
        .collect();

    let cropland = (0..n)
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let inside = x >= spec.border && y >= spec.border && x + spec.border < w && y + spec.border < h;
            u8::from(inside)
        })
        .collect();
    let truth = (0..n).map(|p| field_label[field_of(p)]).collect();
    Ok(SyntheticScene {
        stack: SceneStack {
            width: w,
            height: h,
            observations,
            cropland,
            truth: Some(truth),
            windows: d.windows,
        },
        reference,
    })
}
