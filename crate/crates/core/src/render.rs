//! Class maps and error maps as PPM images.

use crate::error::{Error, Result};
use crate::pnm;

pub type Rgb = [u8; 3];

pub const CORN: Rgb = [0, 170, 0];
pub const OTHER: Rgb = [255, 255, 255];
pub const ERROR: Rgb = [220, 0, 0];
/// Pixels without a value (outside the cropland mask).
pub const NO_DATA: Rgb = [0, 0, 0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Palette {
    pub corn: Rgb,
    pub other: Rgb,
    pub no_data: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            corn: CORN,
            other: OTHER,
            no_data: NO_DATA,
        }
    }
}

/// A class raster: `Some(1)` corn, `Some(0)` other, `None` no data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassRaster {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Option<u8>>,
}

impl ClassRaster {
    pub fn new(width: usize, height: usize) -> Self {
        ClassRaster {
            width,
            height,
            cells: vec![None; width * height],
        }
    }

    /// Scatters per-sample labels onto their pixel coordinates.
    pub fn from_points(width: usize, height: usize, coords: &[(u32, u32)], labels: &[u8]) -> Result<Self> {
        if coords.len() != labels.len() {
            return Err(Error::usage(format!("{} coordinates for {} labels", coords.len(), labels.len())));
        }
        let mut r = ClassRaster::new(width, height);
        for (&(x, y), &l) in coords.iter().zip(labels) {
            let (x, y) = (x as usize, y as usize);
            if x >= width || y >= height {
                return Err(Error::usage(format!("pixel ({x}, {y}) lies outside {width}x{height}")));
            }
            r.cells[y * width + x] = Some(u8::from(l != 0));
        }
        Ok(r)
    }

    pub fn from_mask(width: usize, height: usize, mask: &[u8]) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::usage("mask does not match the raster size"));
        }
        Ok(ClassRaster {
            width,
            height,
            cells: mask.iter().map(|&m| Some(u8::from(m != 0))).collect(),
        })
    }
}

pub fn render_map(raster: &ClassRaster, palette: &Palette) -> Result<Vec<u8>> {
    let px: Vec<Rgb> = raster
        .cells
        .iter()
        .map(|c| match c {
            Some(1) => palette.corn,
            Some(_) => palette.other,
            None => palette.no_data,
        })
        .collect();
    pnm::encode_ppm(raster.width, raster.height, &px)
}

/// Red where both rasters have a value and disagree, white where they agree,
/// no-data colour elsewhere.
pub fn render_error_map(pred: &ClassRaster, truth: &ClassRaster) -> Result<Vec<u8>> {
    if (pred.width, pred.height) != (truth.width, truth.height) {
        return Err(Error::usage(format!(
            "prediction is {}x{}, truth is {}x{}",
            pred.width, pred.height, truth.width, truth.height
        )));
    }
    let px: Vec<Rgb> = pred
        .cells
        .iter()
        .zip(&truth.cells)
        .map(|(p, t)| match (p, t) {
            (Some(p), Some(t)) if p != t => ERROR,
            (Some(_), Some(_)) => OTHER,
            _ => NO_DATA,
        })
        .collect();
    pnm::encode_ppm(pred.width, pred.height, &px)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixels(ppm: &[u8]) -> Vec<Rgb> {
        ppm[header_len(ppm)..]
            .chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
    }

    fn header_len(ppm: &[u8]) -> usize {
        let mut newlines = 0;
        for (i, &b) in ppm.iter().enumerate() {
            if b == b'\n' {
                newlines += 1;
                if newlines == 3 {
                    return i + 1;
                }
            }
        }
        panic!("bad header")
    }

    #[test]
    fn single_flip_gives_one_red_pixel() {
        let truth = ClassRaster::from_mask(3, 2, &[1, 0, 1, 0, 0, 1]).unwrap();
        let mut pred = truth.clone();
        assert!(pixels(&render_error_map(&pred, &truth).unwrap()).iter().all(|&p| p == OTHER));
        pred.cells[4] = Some(1);
        let px = pixels(&render_error_map(&pred, &truth).unwrap());
        assert_eq!(px.iter().filter(|&&p| p == ERROR).count(), 1);
        assert_eq!(px[4], ERROR);
    }

    #[test]
    fn map_uses_palette() {
        let r = ClassRaster::from_points(2, 1, &[(1, 0)], &[1]).unwrap();
        let px = pixels(&render_map(&r, &Palette::default()).unwrap());
        assert_eq!(px, vec![NO_DATA, CORN]);
    }

    #[test]
    fn misaligned_rasters_rejected() {
        let a = ClassRaster::new(2, 2);
        let b = ClassRaster::new(2, 3);
        assert!(matches!(render_error_map(&a, &b), Err(Error::Usage(_))));
    }
}
