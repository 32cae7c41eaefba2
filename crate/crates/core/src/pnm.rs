//! Binary PGM (P5) and PPM (P6) images with 8-bit samples.

use crate::error::{Error, Result};

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::dim(format!("{} pixels for a {width}x{height} image", pixels.len())));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

pub fn encode_ppm(width: usize, height: usize, pixels: &[[u8; 3]]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::dim(format!("{} pixels for a {width}x{height} image", pixels.len())));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().flatten());
    Ok(out)
}

/// A decoded 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn decode_pgm(buf: &[u8]) -> Result<Gray> {
    let mut pos = 0;
    let magic = header_token(buf, &mut pos)?;
    if magic != "P5" {
        return Err(Error::format(0, format!("expected P5, found {magic:?}")));
    }
    let width = header_number(buf, &mut pos)?;
    let height = header_number(buf, &mut pos)?;
    let maxval_at = pos;
    let maxval = header_number(buf, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(maxval_at as u64, format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width * height;
    if buf.len() < pos || buf.len() - pos != n {
        return Err(Error::format(
            pos as u64,
            format!("raster holds {} bytes, expected {n}", buf.len().saturating_sub(pos)),
        ));
    }
    Ok(Gray {
        width,
        height,
        pixels: buf[pos..].to_vec(),
    })
}

fn header_token<'a>(buf: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    loop {
        while *pos < buf.len() && buf[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < buf.len() && buf[*pos] == b'#' {
            while *pos < buf.len() && buf[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < buf.len() && !buf[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(start as u64, "truncated image header"));
    }
    std::str::from_utf8(&buf[start..*pos]).map_err(|_| Error::format(start as u64, "non-ASCII image header"))
}

fn header_number(buf: &[u8], pos: &mut usize) -> Result<usize> {
    let start = *pos;
    let tok = header_token(buf, pos)?;
    tok.parse()
        .map_err(|_| Error::format(start as u64, format!("expected a number in image header, found {tok:?}")))
}
