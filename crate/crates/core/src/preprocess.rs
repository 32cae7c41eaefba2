//! Raster time series → complete per-pixel samples.
//!
//! Cloud-free observations inside each of nine composite windows are
//! averaged per band, interior gaps are filled by linear interpolation along
//! time, and boundary gaps hold the nearest observed value. Pixels outside
//! the cropland mask never enter the output.
//!
//! # Scene directory format
//!
//! ```text
//! manifest.txt      "key = value" lines:
//!                     width, height          pixels
//!                     days                   comma-separated, strictly increasing
//!                     window_starts          9 comma-separated day offsets
//!                     window_len             days per window
//! obs_NNN.u16       observation NNN (0-based, zero-padded to 3 digits):
//!                     6 bands × height × width little-endian u16,
//!                     band-sequential, rows top to bottom, values 0..=10000
//! cloud_NNN.pgm     P5 mask for observation NNN, nonzero = cloudy
//! cropland.pgm      P5 mask, nonzero = cropland
//! truth.pgm         optional P5 mask, nonzero = corn
//! ```
//!
//! Masks are written with 0 and 255.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{LabeledDataset, SampleTensor, BANDS, NIR, RED, TIMESTEPS};
use crate::error::{Error, Result};
use crate::pnm;

pub const REFLECTANCE_SCALE: f64 = 10000.0;
pub const MAX_RAW: u16 = 10000;

/// Composite window layout: nine windows of `len` days starting at `starts`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Windows {
    pub starts: [i32; TIMESTEPS],
    pub len: i32,
}

impl Default for Windows {
    fn default() -> Self {
        Windows {
            starts: [0, 10, 20, 30, 40, 50, 60, 70, 80],
            len: 10,
        }
    }
}

impl Windows {
    pub fn validate(&self) -> Result<()> {
        if self.len <= 0 {
            return Err(Error::config("window length must be positive"));
        }
        if self.starts.windows(2).any(|w| w[1] < w[0] + self.len) {
            return Err(Error::config(format!(
                "windows {:?} of length {} overlap or are out of order",
                self.starts, self.len
            )));
        }
        Ok(())
    }

    /// Window index containing `day`, if any.
    pub fn slot(&self, day: i32) -> Option<usize> {
        self.starts.iter().position(|&s| day >= s && day < s + self.len)
    }

    /// Midpoint day of each window.
    pub fn midpoints(&self) -> [f64; TIMESTEPS] {
        self.starts.map(|s| s as f64 + self.len as f64 / 2.0)
    }

    /// Windows moved by `days`.
    pub fn offset(&self, days: i32) -> Windows {
        Windows {
            starts: self.starts.map(|s| s + days),
            len: self.len,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub day: i32,
    /// Band-sequential raw reflectance, `6 × height × width`.
    pub bands: Vec<u16>,
    /// `1` where the pixel is cloudy.
    pub cloud: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SceneStack {
    pub width: usize,
    pub height: usize,
    pub observations: Vec<Observation>,
    /// `1` where the pixel is cropland.
    pub cropland: Vec<u8>,
    /// `1` where the pixel is corn.
    pub truth: Option<Vec<u8>>,
    pub windows: Windows,
}

impl SceneStack {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pixels();
        if n == 0 {
            return Err(Error::config("scene has no pixels"));
        }
        self.windows.validate()?;
        if self.cropland.len() != n {
            return Err(Error::dim("cropland mask does not match the scene size"));
        }
        if self.truth.as_ref().is_some_and(|t| t.len() != n) {
            return Err(Error::dim("truth raster does not match the scene size"));
        }
        for (i, obs) in self.observations.iter().enumerate() {
            if obs.bands.len() != BANDS * n || obs.cloud.len() != n {
                return Err(Error::dim(format!("observation {i} does not match the scene size")));
            }
            if obs.bands.iter().any(|&v| v > MAX_RAW) {
                return Err(Error::usage(format!("observation {i} has reflectance above {MAX_RAW}")));
            }
        }
        if self.observations.windows(2).any(|w| w[1].day <= w[0].day) {
            return Err(Error::usage("observation days must be strictly increasing"));
        }
        Ok(())
    }
}

/// One cropland pixel's composite: `None` marks a window without any
/// cloud-free observation.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelSeries {
    pub x: u32,
    pub y: u32,
    pub slots: [[Option<f64>; BANDS]; TIMESTEPS],
}

impl PixelSeries {
    pub fn is_complete(&self) -> bool {
        self.slots.iter().flatten().all(Option::is_some)
    }

    pub fn to_sample(&self) -> Option<SampleTensor> {
        let mut s = SampleTensor::zeros();
        for (t, row) in self.slots.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                s.0[t][b] = (*v)?;
            }
        }
        Some(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeSeries {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<PixelSeries>,
    /// Pixels outside the cropland mask.
    pub non_cropland: usize,
    /// Pixels removed by [`fill_gaps`] because a band had no observation.
    pub dropped: usize,
}

/// Per-window means of cloud-free observations, scaled into `[0, 1]`.
pub fn composite(stack: &SceneStack, windows: &Windows) -> Result<CompositeSeries> {
    if stack.observations.is_empty() {
        return Err(Error::usage("scene has no observations"));
    }
    stack.validate()?;
    windows.validate()?;
    let n = stack.pixels();
    let slot_of: Vec<Option<usize>> = stack.observations.iter().map(|o| windows.slot(o.day)).collect();
    let mut pixels = Vec::new();
    let mut non_cropland = 0;
    for p in 0..n {
        if stack.cropland[p] == 0 {
            non_cropland += 1;
            continue;
        }
        let mut sums = [[0u64; BANDS]; TIMESTEPS];
        let mut counts = [0u32; TIMESTEPS];
        for (obs, slot) in stack.observations.iter().zip(&slot_of) {
            let Some(t) = *slot else { continue };
            if obs.cloud[p] != 0 {
                continue;
            }
            counts[t] += 1;
            for (b, sum) in sums[t].iter_mut().enumerate() {
                *sum += u64::from(obs.bands[b * n + p]);
            }
        }
        let mut slots = [[None; BANDS]; TIMESTEPS];
        for t in 0..TIMESTEPS {
            if counts[t] == 0 {
                continue;
            }
            for b in 0..BANDS {
                slots[t][b] = Some(sums[t][b] as f64 / (f64::from(counts[t]) * REFLECTANCE_SCALE));
            }
        }
        pixels.push(PixelSeries {
            x: (p % stack.width) as u32,
            y: (p / stack.width) as u32,
            slots,
        });
    }
    Ok(CompositeSeries {
        width: stack.width,
        height: stack.height,
        pixels,
        non_cropland,
        dropped: 0,
    })
}

/// Fills missing slots band by band: linear interpolation between the
/// nearest observed neighbours, constant hold before the first and after the
/// last observation. Pixels with a band missing in every window are dropped
/// and counted in [`CompositeSeries::dropped`].
pub fn fill_gaps(series: &CompositeSeries) -> CompositeSeries {
    let mut out = series.clone();
    out.pixels.clear();
    for px in &series.pixels {
        let mut filled = px.clone();
        let mut ok = true;
        for b in 0..BANDS {
            let column: [Option<f64>; TIMESTEPS] = std::array::from_fn(|t| px.slots[t][b]);
            match fill_column(&column) {
                Some(col) => {
                    for t in 0..TIMESTEPS {
                        filled.slots[t][b] = Some(col[t]);
                    }
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.pixels.push(filled);
        } else {
            out.dropped += 1;
        }
    }
    out
}

fn fill_column(col: &[Option<f64>; TIMESTEPS]) -> Option<[f64; TIMESTEPS]> {
    let known: Vec<usize> = (0..TIMESTEPS).filter(|&t| col[t].is_some()).collect();
    let (&first, &last) = (known.first()?, known.last()?);
    let mut out = [0.0; TIMESTEPS];
    for t in 0..TIMESTEPS {
        out[t] = match col[t] {
            Some(v) => v,
            None if t < first => col[first].unwrap(),
            None if t > last => col[last].unwrap(),
            None => {
                let lo = known.iter().rev().copied().find(|&k| k < t).unwrap();
                let hi = known.iter().copied().find(|&k| k > t).unwrap();
                let (a, b) = (col[lo].unwrap(), col[hi].unwrap());
                a + (b - a) * (t - lo) as f64 / (hi - lo) as f64
            }
        };
    }
    Some(out)
}

/// One sample per retained pixel, with coordinates and, when a truth raster
/// is given, its labels.
pub fn extract_samples(series: &CompositeSeries, truth: Option<&[u8]>, domain: &str) -> Result<LabeledDataset> {
    let mut samples = Vec::with_capacity(series.pixels.len());
    let mut coords = Vec::with_capacity(series.pixels.len());
    for px in &series.pixels {
        let s = px
            .to_sample()
            .ok_or_else(|| Error::usage(format!("pixel ({}, {}) still has gaps; run fill_gaps first", px.x, px.y)))?;
        samples.push(s.clipped());
        coords.push((px.x, px.y));
    }
    let labels = match truth {
        Some(t) => {
            if t.len() != series.width * series.height {
                return Err(Error::dim("truth raster does not match the scene size"));
            }
            Some(
                coords
                    .iter()
                    .map(|&(x, y)| u8::from(t[y as usize * series.width + x as usize] != 0))
                    .collect(),
            )
        }
        None => None,
    };
    LabeledDataset::new(samples, labels, domain)?.with_coords(coords)
}

/// Outcome of running the whole pipeline on a scene.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessReport {
    pub pixels: usize,
    pub non_cropland: usize,
    pub dropped: usize,
    pub retained: usize,
}

/// composite → fill_gaps → extract_samples.
pub fn preprocess(stack: &SceneStack, domain: &str) -> Result<(LabeledDataset, PreprocessReport)> {
    let series = fill_gaps(&composite(stack, &stack.windows)?);
    let ds = extract_samples(&series, stack.truth.as_deref(), domain)?;
    let report = PreprocessReport {
        pixels: stack.pixels(),
        non_cropland: series.non_cropland,
        dropped: series.dropped,
        retained: ds.len(),
    };
    Ok((ds, report))
}

/// NDVI per timestep, `(NIR − Red) / (NIR + Red)`, zero where both vanish.
pub fn ndvi(sample: &SampleTensor) -> [f64; TIMESTEPS] {
    sample.0.map(|row| {
        let (nir, red) = (row[NIR], row[RED]);
        let s = nir + red;
        if s == 0.0 {
            0.0
        } else {
            (nir - red) / s
        }
    })
}

fn mask_to_pgm(mask: &[u8], w: usize, h: usize) -> Result<Vec<u8>> {
    let px: Vec<u8> = mask.iter().map(|&m| if m != 0 { 255 } else { 0 }).collect();
    pnm::encode_pgm(w, h, &px)
}

fn read_mask(path: &Path, w: usize, h: usize) -> Result<Vec<u8>> {
    let img = pnm::decode_pgm(&std::fs::read(path)?)?;
    if (img.width, img.height) != (w, h) {
        return Err(Error::format(
            0,
            format!("{} is {}x{}, scene is {w}x{h}", path.display(), img.width, img.height),
        ));
    }
    Ok(img.pixels.into_iter().map(|v| u8::from(v != 0)).collect())
}

fn join(values: impl IntoIterator<Item = i32>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn save_scene(stack: &SceneStack, dir: &Path) -> Result<()> {
    stack.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    writeln!(manifest, "width = {}", stack.width).unwrap();
    writeln!(manifest, "height = {}", stack.height).unwrap();
    writeln!(manifest, "days = {}", join(stack.observations.iter().map(|o| o.day))).unwrap();
    writeln!(manifest, "window_starts = {}", join(stack.windows.starts)).unwrap();
    writeln!(manifest, "window_len = {}", stack.windows.len).unwrap();
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    for (i, obs) in stack.observations.iter().enumerate() {
        let raw: Vec<u8> = obs.bands.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(dir.join(format!("obs_{i:03}.u16")), raw)?;
        std::fs::write(dir.join(format!("cloud_{i:03}.pgm")), mask_to_pgm(&obs.cloud, stack.width, stack.height)?)?;
    }
    std::fs::write(dir.join("cropland.pgm"), mask_to_pgm(&stack.cropland, stack.width, stack.height)?)?;
    if let Some(t) = &stack.truth {
        std::fs::write(dir.join("truth.pgm"), mask_to_pgm(t, stack.width, stack.height)?)?;
    }
    Ok(())
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut offset = 0u64;
    for line in text.lines() {
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            let (k, v) = trimmed
                .split_once('=')
                .ok_or_else(|| Error::format(offset, format!("expected 'key = value', found {trimmed:?}")))?;
            map.insert(k.trim().to_owned(), v.trim().to_owned());
        }
        offset += line.len() as u64 + 1;
    }
    Ok(map)
}

fn manifest_field<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::format(0, format!("scene manifest lacks '{key}'")))
}

fn parse_list(s: &str, key: &str) -> Result<Vec<i32>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| Error::format(0, format!("bad integer {v:?} in '{key}'"))))
        .collect()
}

fn parse_usize(map: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    let v = manifest_field(map, key)?;
    v.parse().map_err(|_| Error::format(0, format!("bad value {v:?} for '{key}'")))
}

pub fn load_scene(dir: &Path) -> Result<SceneStack> {
    let text = std::fs::read_to_string(dir.join("manifest.txt"))?;
    let map = parse_key_values(&text)?;
    let width = parse_usize(&map, "width")?;
    let height = parse_usize(&map, "height")?;
    let days = parse_list(manifest_field(&map, "days")?, "days")?;
    let starts = parse_list(manifest_field(&map, "window_starts")?, "window_starts")?;
    let starts: [i32; TIMESTEPS] = starts
        .try_into()
        .map_err(|_| Error::format(0, format!("'window_starts' needs {TIMESTEPS} values")))?;
    let len = parse_usize(&map, "window_len")? as i32;
    let n = width * height;
    let mut observations = Vec::with_capacity(days.len());
    for (i, &day) in days.iter().enumerate() {
        let path = dir.join(format!("obs_{i:03}.u16"));
        let raw = std::fs::read(&path)?;
        if raw.len() != 2 * BANDS * n {
            return Err(Error::format(
                raw.len().min(2 * BANDS * n) as u64,
                format!("{} holds {} bytes, expected {}", path.display(), raw.len(), 2 * BANDS * n),
            ));
        }
        let bands = raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        let cloud = read_mask(&dir.join(format!("cloud_{i:03}.pgm")), width, height)?;
        observations.push(Observation { day, bands, cloud });
    }
    let cropland = read_mask(&dir.join("cropland.pgm"), width, height)?;
    let truth_path = dir.join("truth.pgm");
    let truth = if truth_path.exists() {
        Some(read_mask(&truth_path, width, height)?)
    } else {
        None
    };
    let stack = SceneStack {
        width,
        height,
        observations,
        cropland,
        truth,
        windows: Windows { starts, len },
    };
    stack.validate()?;
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[Option<f64>]) -> [Option<f64>; TIMESTEPS] {
        let mut c = [None; TIMESTEPS];
        c[..values.len()].copy_from_slice(values);
        for t in values.len()..TIMESTEPS {
            c[t] = values.last().copied().flatten();
        }
        c
    }

    #[test]
    fn interior_gap_interpolates() {
        let c = column(&[Some(1.0), None, Some(3.0)]);
        let f = fill_column(&c).unwrap();
        assert_eq!(&f[..3], &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn leading_gap_holds_first_value() {
        let c = column(&[None, Some(2.0), Some(4.0)]);
        let f = fill_column(&c).unwrap();
        assert_eq!(&f[..3], &[2.0, 2.0, 4.0]);
    }

    #[test]
    fn all_missing_column_drops() {
        assert!(fill_column(&[None; TIMESTEPS]).is_none());
    }

    fn one_pixel_stack(days: &[i32], values: &[u16], cloudy: &[u8]) -> SceneStack {
        SceneStack {
            width: 1,
            height: 1,
            observations: days
                .iter()
                .zip(values)
                .zip(cloudy)
                .map(|((&day, &v), &c)| Observation {
                    day,
                    bands: vec![v; BANDS],
                    cloud: vec![c],
                })
                .collect(),
            cropland: vec![1],
            truth: None,
            windows: Windows::default(),
        }
    }

    #[test]
    fn composite_averages_clear_observations() {
        let s = one_pixel_stack(&[1, 4, 7], &[2000, 4000, 9000], &[0, 0, 1]);
        let c = composite(&s, &s.windows).unwrap();
        assert_eq!(c.pixels[0].slots[0][0], Some(0.3));
        assert_eq!(c.pixels[0].slots[1][0], None);
    }

    #[test]
    fn cloudy_window_is_missing_and_non_cropland_is_excluded() {
        let mut s = one_pixel_stack(&[1, 4], &[2000, 4000], &[1, 1]);
        let c = composite(&s, &s.windows).unwrap();
        assert_eq!(c.pixels[0].slots[0][0], None);
        s.cropland = vec![0];
        let c = composite(&s, &s.windows).unwrap();
        assert!(c.pixels.is_empty());
        assert_eq!(c.non_cropland, 1);
    }

    #[test]
    fn empty_stack_is_usage_error() {
        let s = one_pixel_stack(&[], &[], &[]);
        assert!(matches!(composite(&s, &s.windows), Err(Error::Usage(_))));
    }

    #[test]
    fn ndvi_values() {
        let mut s = SampleTensor::zeros();
        s.0[0][NIR] = 0.6;
        s.0[0][RED] = 0.2;
        s.0[1][NIR] = 0.3;
        s.0[1][RED] = 0.3;
        let v = ndvi(&s);
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert_eq!(v[1], 0.0);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn overlapping_windows_rejected() {
        let w = Windows {
            starts: [0, 5, 20, 30, 40, 50, 60, 70, 80],
            len: 10,
        };
        assert!(w.validate().is_err());
    }
}
