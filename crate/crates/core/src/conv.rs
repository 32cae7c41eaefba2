//! Cross-correlation kernels shared by the convolution and transposed
//! convolution graph operations.
//!
//! Activations are `[N, H, W, C]`; kernels are `[kh, kw, A, B]` and map `A`
//! input channels to `B` output channels under [`correlate`].

use crate::error::{Error, Result};

/// Kernel size, stride and zero padding of a 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl ConvGeometry {
    pub const fn new(kernel: (usize, usize), stride: (usize, usize), padding: (usize, usize)) -> Self {
        ConvGeometry {
            kernel,
            stride,
            padding,
        }
    }

    /// Output extent of a forward convolution over an `h × w` input.
    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        if kh == 0 || kw == 0 || sh == 0 || sw == 0 {
            return Err(Error::config(format!("degenerate convolution geometry {self:?}")));
        }
        let padded_h = h + 2 * ph;
        let padded_w = w + 2 * pw;
        if padded_h < kh || padded_w < kw {
            return Err(Error::config(format!(
                "kernel {kh}x{kw} does not fit a padded {padded_h}x{padded_w} input"
            )));
        }
        Ok(((padded_h - kh) / sh + 1, (padded_w - kw) / sw + 1))
    }

    /// Output extent of a transposed convolution over an `h × w` input.
    pub fn transposed_output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        if kh == 0 || kw == 0 || sh == 0 || sw == 0 || h == 0 || w == 0 {
            return Err(Error::config(format!("degenerate convolution geometry {self:?}")));
        }
        let oh = ((h - 1) * sh + kh).checked_sub(2 * ph).filter(|&v| v >= 1);
        let ow = ((w - 1) * sw + kw).checked_sub(2 * pw).filter(|&v| v >= 1);
        match (oh, ow) {
            (Some(oh), Some(ow)) => Ok((oh, ow)),
            _ => Err(Error::config(format!(
                "transposed convolution {self:?} yields an empty output for {h}x{w}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Dims {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Dims {
    pub fn from_shape(shape: &[usize]) -> Result<Self> {
        match *shape {
            [n, h, w, c] => Ok(Dims { n, h, w, c }),
            _ => Err(Error::dim(format!("expected [N, H, W, C], got {shape:?}"))),
        }
    }
}

#[inline]
fn source_index(out: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
    (out * stride + k).checked_sub(pad).filter(|&i| i < extent)
}

/// `y[n,oh,ow,b] = Σ x[n, oh·sh+ki−ph, ow·sw+kj−pw, a] · k[ki,kj,a,b]`.
pub(crate) fn correlate(x: &[f64], xd: Dims, k: &[f64], b_ch: usize, g: &ConvGeometry, out: (usize, usize)) -> Vec<f64> {
    let (kh, kw) = g.kernel;
    let (oh_n, ow_n) = out;
    let mut y = vec![0.0; xd.n * oh_n * ow_n * b_ch];
    for n in 0..xd.n {
        for oh in 0..oh_n {
            for ow in 0..ow_n {
                let ybase = ((n * oh_n + oh) * ow_n + ow) * b_ch;
                let acc = &mut y[ybase..ybase + b_ch];
                for ki in 0..kh {
                    let Some(ih) = source_index(oh, ki, g.stride.0, g.padding.0, xd.h) else { continue };
                    for kj in 0..kw {
                        let Some(iw) = source_index(ow, kj, g.stride.1, g.padding.1, xd.w) else { continue };
                        let xbase = ((n * xd.h + ih) * xd.w + iw) * xd.c;
                        for a in 0..xd.c {
                            let xv = x[xbase + a];
                            let kbase = ((ki * kw + kj) * xd.c + a) * b_ch;
                            for (acc_b, kv) in acc.iter_mut().zip(&k[kbase..kbase + b_ch]) {
                                *acc_b += xv * kv;
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

/// Adjoint of [`correlate`] with respect to its input: scatters `gy` back to
/// an `[N, h, w, a_ch]` array.
pub(crate) fn correlate_adjoint(gy: &[f64], yd: Dims, k: &[f64], a_ch: usize, g: &ConvGeometry, input: (usize, usize)) -> Vec<f64> {
    let (kh, kw) = g.kernel;
    let (h, w) = input;
    let b_ch = yd.c;
    let mut gx = vec![0.0; yd.n * h * w * a_ch];
    for n in 0..yd.n {
        for oh in 0..yd.h {
            for ow in 0..yd.w {
                let ybase = ((n * yd.h + oh) * yd.w + ow) * b_ch;
                let gyv = &gy[ybase..ybase + b_ch];
                for ki in 0..kh {
                    let Some(ih) = source_index(oh, ki, g.stride.0, g.padding.0, h) else { continue };
                    for kj in 0..kw {
                        let Some(iw) = source_index(ow, kj, g.stride.1, g.padding.1, w) else { continue };
                        let xbase = ((n * h + ih) * w + iw) * a_ch;
                        for a in 0..a_ch {
                            let kbase = ((ki * kw + kj) * a_ch + a) * b_ch;
                            let s: f64 = k[kbase..kbase + b_ch].iter().zip(gyv).map(|(kv, gv)| kv * gv).sum();
                            gx[xbase + a] += s;
                        }
                    }
                }
            }
        }
    }
    gx
}

/// Gradient of [`correlate`] with respect to its kernel.
pub(crate) fn correlate_kernel_grad(x: &[f64], xd: Dims, gy: &[f64], yd: Dims, g: &ConvGeometry) -> Vec<f64> {
    let (kh, kw) = g.kernel;
    let b_ch = yd.c;
    let mut gk = vec![0.0; kh * kw * xd.c * b_ch];
    for n in 0..xd.n {
        for oh in 0..yd.h {
            for ow in 0..yd.w {
                let ybase = ((n * yd.h + oh) * yd.w + ow) * b_ch;
                let gyv = &gy[ybase..ybase + b_ch];
                for ki in 0..kh {
                    let Some(ih) = source_index(oh, ki, g.stride.0, g.padding.0, xd.h) else { continue };
                    for kj in 0..kw {
                        let Some(iw) = source_index(ow, kj, g.stride.1, g.padding.1, xd.w) else { continue };
                        let xbase = ((n * xd.h + ih) * xd.w + iw) * xd.c;
                        for a in 0..xd.c {
                            let xv = x[xbase + a];
                            let kbase = ((ki * kw + kj) * xd.c + a) * b_ch;
                            for (gkv, gv) in gk[kbase..kbase + b_ch].iter_mut().zip(gyv) {
                                *gkv += xv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    gk
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_sizes_follow_the_generator_chain() {
        let enc = ConvGeometry::new((3, 2), (1, 1), (0, 0));
        let mut hw = (9, 6);
        let mut chain = vec![hw];
        for _ in 0..4 {
            hw = enc.output_size(hw.0, hw.1).unwrap();
            chain.push(hw);
        }
        assert_eq!(chain, vec![(9, 6), (7, 5), (5, 4), (3, 3), (1, 2)]);
        for _ in 0..4 {
            hw = enc.transposed_output_size(hw.0, hw.1).unwrap();
            chain.push(hw);
        }
        assert_eq!(&chain[4..], &[(1, 2), (3, 3), (5, 4), (7, 5), (9, 6)]);
    }

    #[test]
    fn kernel_larger_than_input_is_rejected() {
        let g = ConvGeometry::new((5, 5), (1, 1), (0, 0));
        assert!(matches!(g.output_size(3, 3), Err(Error::Config(_))));
        let zero_stride = ConvGeometry::new((1, 1), (0, 1), (0, 0));
        assert!(zero_stride.output_size(3, 3).is_err());
    }

    #[test]
    fn transposed_padding_too_large_is_rejected() {
        let g = ConvGeometry::new((2, 2), (1, 1), (2, 2));
        assert!(g.transposed_output_size(1, 1).is_err());
    }
}
