//! Per-pixel spectral time series and their on-disk format.
//!
//! A dataset file is little-endian:
//!
//! ```text
//! magic      b"CGTS"
//! version    u16 (= 1)
//! count      u32
//! timesteps  u16 (= 9)
//! bands      u16 (= 6)
//! flags      u8   bit 0: labels present, bit 1: pixel coordinates present
//! samples    count × 9 × 6 f64, row-major (timestep, band)
//! labels     count × u8            (if bit 0)
//! coords     count × (u32 x, u32 y) (if bit 1)
//! ```

use std::path::Path;

use crate::binio::ByteReader;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const TIMESTEPS: usize = 9;
pub const BANDS: usize = 6;
pub const SAMPLE_LEN: usize = TIMESTEPS * BANDS;

/// Band order of every sample.
pub const BAND_NAMES: [&str; BANDS] = ["B2", "B3", "B4", "B8", "B11", "B12"];
pub const RED: usize = 2;
pub const NIR: usize = 3;

const MAGIC: &[u8; 4] = b"CGTS";
const VERSION: u16 = 1;
const FLAG_LABELS: u8 = 1;
const FLAG_COORDS: u8 = 2;

/// One pixel's reflectance: 9 composite windows × 6 bands, in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleTensor(pub [[f64; BANDS]; TIMESTEPS]);

impl SampleTensor {
    pub fn zeros() -> Self {
        SampleTensor([[0.0; BANDS]; TIMESTEPS])
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != SAMPLE_LEN {
            return Err(Error::dim(format!("a sample has {SAMPLE_LEN} values, got {}", values.len())));
        }
        let mut s = Self::zeros();
        for (t, row) in s.0.iter_mut().enumerate() {
            row.copy_from_slice(&values[t * BANDS..(t + 1) * BANDS]);
        }
        Ok(s)
    }

    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.flat().collect()
    }

    pub fn in_unit_range(&self) -> bool {
        self.flat().all(|v| (0.0..=1.0).contains(&v))
    }

    pub fn clipped(&self) -> Self {
        let mut s = *self;
        s.0.iter_mut().flatten().for_each(|v| *v = v.clamp(0.0, 1.0));
        s
    }
}

/// Stacks samples into a `[N, 9, 6, 1]` network input.
pub fn stack(samples: &[SampleTensor]) -> Tensor {
    let data: Vec<f64> = samples.iter().flat_map(|s| s.flat()).collect();
    Tensor::new(vec![samples.len(), TIMESTEPS, BANDS, 1], data).expect("stacked samples are well-formed")
}

/// Splits a `[N, 9, 6, 1]` tensor back into samples.
pub fn unstack(t: &Tensor) -> Result<Vec<SampleTensor>> {
    match *t.shape() {
        [_, TIMESTEPS, BANDS, 1] => t.data().chunks(SAMPLE_LEN).map(SampleTensor::from_flat).collect(),
        ref s => Err(Error::dim(format!("expected [N, 9, 6, 1], got {s:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<SampleTensor>,
    /// `1` = corn, `0` = anything else.
    pub labels: Option<Vec<u8>>,
    pub domain: String,
    /// Pixel `(x, y)` of each sample, when it came from a raster.
    pub coords: Option<Vec<(u32, u32)>>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<SampleTensor>, labels: Option<Vec<u8>>, domain: impl Into<String>) -> Result<Self> {
        let ds = LabeledDataset {
            samples,
            labels,
            domain: domain.into(),
            coords: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_coords(mut self, coords: Vec<(u32, u32)>) -> Result<Self> {
        self.coords = Some(coords);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(labels) = &self.labels {
            if labels.len() != self.samples.len() {
                return Err(Error::dim(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    self.samples.len()
                )));
            }
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::usage("labels must be 0 or 1"));
            }
        }
        if let Some(coords) = &self.coords {
            if coords.len() != self.samples.len() {
                return Err(Error::dim(format!(
                    "{} coordinates for {} samples",
                    coords.len(),
                    self.samples.len()
                )));
            }
        }
        if let Some(i) = self.samples.iter().position(|s| !s.in_unit_range()) {
            return Err(Error::usage(format!("sample {i} has values outside [0, 1]")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::usage(format!("dataset '{}' is unlabeled", self.domain)))
    }

    /// Dataset restricted to `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: indices.iter().map(|&i| self.samples[i]).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            domain: self.domain.clone(),
            coords: self.coords.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    pub fn without_labels(&self) -> LabeledDataset {
        LabeledDataset {
            labels: None,
            ..self.clone()
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17 + self.len() * (SAMPLE_LEN * 8 + 9));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(TIMESTEPS as u16).to_le_bytes());
        out.extend_from_slice(&(BANDS as u16).to_le_bytes());
        let mut flags = 0u8;
        if self.labels.is_some() {
            flags |= FLAG_LABELS;
        }
        if self.coords.is_some() {
            flags |= FLAG_COORDS;
        }
        out.push(flags);
        for v in self.samples.iter().flat_map(|s| s.flat()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(labels) = &self.labels {
            out.extend_from_slice(labels);
        }
        if let Some(coords) = &self.coords {
            for &(x, y) in coords {
                out.extend_from_slice(&x.to_le_bytes());
                out.extend_from_slice(&y.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8], domain: impl Into<String>) -> Result<Self> {
        let mut r = ByteReader::new(buf);
        if r.bytes(4, "magic")? != MAGIC {
            return Err(Error::format(0, "not a dataset file (bad magic)"));
        }
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported dataset version {version}")));
        }
        let count = r.u32("sample count")? as usize;
        let at = r.offset();
        let (t, b) = (r.u16("timesteps")?, r.u16("bands")?);
        if (t as usize, b as usize) != (TIMESTEPS, BANDS) {
            return Err(Error::format(at, format!("samples must be {TIMESTEPS}x{BANDS}, file says {t}x{b}")));
        }
        let at = r.offset();
        let flags = r.u8("flags")?;
        if flags & !(FLAG_LABELS | FLAG_COORDS) != 0 {
            return Err(Error::format(at, format!("unknown flag bits {flags:#04x}")));
        }
        let needed = count
            .checked_mul(SAMPLE_LEN * 8)
            .ok_or_else(|| Error::format(at, "sample count overflows"))?;
        if r.remaining() < needed {
            return Err(Error::format(r.offset(), format!("truncated samples: need {needed} bytes, {} left", r.remaining())));
        }
        let mut samples = Vec::with_capacity(count);
        let mut flat = [0.0; SAMPLE_LEN];
        for _ in 0..count {
            for v in flat.iter_mut() {
                *v = r.f64("sample value")?;
            }
            samples.push(SampleTensor::from_flat(&flat)?);
        }
        let labels = if flags & FLAG_LABELS != 0 {
            let at = r.offset();
            let raw = r.bytes(count, "labels")?;
            if raw.iter().any(|&l| l > 1) {
                return Err(Error::format(at, "label outside {0, 1}"));
            }
            Some(raw.to_vec())
        } else {
            None
        };
        let coords = if flags & FLAG_COORDS != 0 {
            let mut c = Vec::with_capacity(count);
            for _ in 0..count {
                c.push((r.u32("coordinate")?, r.u32("coordinate")?));
            }
            Some(c)
        } else {
            None
        };
        r.expect_end()?;
        let ds = LabeledDataset {
            samples,
            labels,
            domain: domain.into(),
            coords,
        };
        ds.validate().map_err(|e| Error::format(17, e))?;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Loads a dataset; its domain tag is the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path)?;
        let domain = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::from_bytes(&buf, domain)
    }
}
