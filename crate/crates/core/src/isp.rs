//! Forward and inverse camera ISP stages.
//!
//! The forward pipeline is demosaic → white balance → color correction →
//! gamma compression → tone map. Every stage has an inverse used when
//! unprocessing sRGB frames back to linear raw intensities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{check_even, BayerImage, CfaColor, ColorSpace, ImageBuffer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IspConfig {
    pub gamma: f64,
    /// Camera RGB → sRGB, row-major.
    pub ccm: [f64; 9],
    pub wb_red_gain: f64,
    pub wb_blue_gain: f64,
    pub saturation_threshold: f64,
}

pub const IDENTITY_CCM: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

impl Default for IspConfig {
    fn default() -> Self {
        Self {
            gamma: 2.2,
            ccm: IDENTITY_CCM,
            wb_red_gain: 1.0,
            wb_blue_gain: 1.0,
            saturation_threshold: 0.9,
        }
    }
}

impl IspConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        if det3(&self.ccm).abs() <= 1e-8 {
            return Err(Error::invalid("color correction matrix is singular"));
        }
        for (r, row) in self.ccm.chunks_exact(3).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "color correction row {r} sums to {s}, expected 1"
                )));
            }
        }
        if self.wb_red_gain < 1.0 || self.wb_blue_gain < 1.0 {
            return Err(Error::invalid("white balance gains must be >= 1"));
        }
        if !(self.saturation_threshold > 0.0 && self.saturation_threshold < 1.0) {
            return Err(Error::invalid("saturation threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcmDirection {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainDirection {
    Apply,
    Invert,
}

/// Smoothstep tone curve `3x² − 2x³`.
#[inline]
pub fn tone_map(x: f64) -> f64 {
    x * x * (3.0 - 2.0 * x)
}

/// Closed-form inverse of [`tone_map`] on [0, 1].
#[inline]
pub fn inverse_tone_map(y: f64) -> f64 {
    0.5 - ((1.0 - 2.0 * y).asin() / 3.0).sin()
}

pub fn srgb_to_linear(img: &ImageBuffer, cfg: &IspConfig) -> Result<ImageBuffer> {
    img.ensure_space(ColorSpace::Srgb)?;
    let g = cfg.gamma;
    Ok(img
        .map(|v| inverse_tone_map(v.clamp(0.0, 1.0)).max(0.0).powf(g))
        .with_space(ColorSpace::LinearRgb))
}

/// Gamma compression followed by the tone curve. Inputs are clamped to
/// [0, 1] first since color correction may push values slightly outside.
pub fn linear_to_srgb(img: &ImageBuffer, cfg: &IspConfig) -> Result<ImageBuffer> {
    img.ensure_space(ColorSpace::LinearRgb)?;
    let inv = 1.0 / cfg.gamma;
    Ok(img
        .map(|v| tone_map(v.clamp(0.0, 1.0).powf(inv)))
        .with_space(ColorSpace::Srgb))
}

pub fn det3(m: &[f64; 9]) -> f64 {
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

pub fn invert3(m: &[f64; 9]) -> Result<[f64; 9]> {
    let det = det3(m);
    if det.abs() <= 1e-8 {
        return Err(Error::invalid(format!("singular 3x3 matrix (det = {det})")));
    }
    let inv_det = 1.0 / det;
    Ok([
        (m[4] * m[8] - m[5] * m[7]) * inv_det,
        (m[2] * m[7] - m[1] * m[8]) * inv_det,
        (m[1] * m[5] - m[2] * m[4]) * inv_det,
        (m[5] * m[6] - m[3] * m[8]) * inv_det,
        (m[0] * m[8] - m[2] * m[6]) * inv_det,
        (m[2] * m[3] - m[0] * m[5]) * inv_det,
        (m[3] * m[7] - m[4] * m[6]) * inv_det,
        (m[1] * m[6] - m[0] * m[7]) * inv_det,
        (m[0] * m[4] - m[1] * m[3]) * inv_det,
    ])
}

pub fn apply_ccm(img: &ImageBuffer, cfg: &IspConfig, dir: CcmDirection) -> Result<ImageBuffer> {
    if img.channels() != 3 {
        return Err(Error::invalid("color correction needs a 3-channel image"));
    }
    let m = match dir {
        CcmDirection::Forward => {
            invert3(&cfg.ccm)?;
            cfg.ccm
        }
        CcmDirection::Inverse => invert3(&cfg.ccm)?,
    };
    let mut out = img.clone();
    out.data_mut().par_chunks_exact_mut(3).for_each(|p| {
        let (r, g, b) = (p[0], p[1], p[2]);
        p[0] = m[0] * r + m[1] * g + m[2] * b;
        p[1] = m[3] * r + m[4] * g + m[5] * b;
        p[2] = m[6] * r + m[7] * g + m[8] * b;
    });
    Ok(out)
}

/// Divides `x` by `gain`, blending back toward `x` above `threshold` so
/// that highlights keep their intensity.
#[inline]
pub fn saturation_aware_divide(x: f64, gain: f64, threshold: f64) -> f64 {
    let a = ((x - threshold).max(0.0) / (1.0 - threshold)).powi(2);
    x * (a + (1.0 - a) / gain)
}

pub fn apply_gains(
    img: &ImageBuffer,
    red_gain: f64,
    blue_gain: f64,
    threshold: f64,
    dir: GainDirection,
) -> Result<ImageBuffer> {
    if img.channels() != 3 {
        return Err(Error::invalid("white balance needs a 3-channel image"));
    }
    if !(red_gain > 0.0 && blue_gain > 0.0) {
        return Err(Error::invalid("gains must be positive"));
    }
    if dir == GainDirection::Invert && !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid("saturation threshold must lie in (0, 1)"));
    }
    let mut out = img.clone();
    out.data_mut()
        .par_chunks_exact_mut(3)
        .for_each(|p| match dir {
            GainDirection::Apply => {
                p[0] = (p[0] * red_gain).clamp(0.0, 1.0);
                p[2] = (p[2] * blue_gain).clamp(0.0, 1.0);
            }
            GainDirection::Invert => {
                p[0] = saturation_aware_divide(p[0], red_gain, threshold);
                p[2] = saturation_aware_divide(p[2], blue_gain, threshold);
            }
        });
    Ok(out)
}

/// Samples one channel per site following the RGGB phase.
pub fn mosaic(img: &ImageBuffer) -> Result<BayerImage> {
    if img.channels() != 3 {
        return Err(Error::invalid("mosaic needs a 3-channel image"));
    }
    let (w, h) = (img.width(), img.height());
    check_even(w, h)?;
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(img.get(x, y, CfaColor::at(x, y).channel()));
        }
    }
    BayerImage::from_vec(w, h, data)
}

/// Bilinear demosaic.
///
/// Each missing channel is the tent-weighted (`(2−|dx|)(2−|dy|)`) mean of the
/// same-color sites in the 3×3 neighborhood, renormalized over the sites
/// that fall inside the frame. In the interior this is exactly classic
/// bilinear interpolation; at the border only in-frame neighbors are used.
pub fn demosaic(raw: &BayerImage) -> Result<ImageBuffer> {
    let (w, h) = (raw.width(), raw.height());
    check_even(w, h)?;
    let src = raw.data();
    let mut out = vec![0.0; w * h * 3];
    out.par_chunks_exact_mut(w * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let own = CfaColor::at(x, y).channel();
                for c in 0..3 {
                    row[x * 3 + c] = if c == own {
                        src[y * w + x]
                    } else {
                        interpolate_site(src, w, h, x, y, c)
                    };
                }
            }
        });
    ImageBuffer::from_vec(w, h, 3, ColorSpace::LinearRgb, out)
}

#[inline]
fn interpolate_site(src: &[f64], w: usize, h: usize, x: usize, y: usize, c: usize) -> f64 {
    let mut acc = 0.0;
    let mut norm = 0.0;
    for dy in -1isize..=1 {
        let yy = y as isize + dy;
        if yy < 0 || yy >= h as isize {
            continue;
        }
        for dx in -1isize..=1 {
            let xx = x as isize + dx;
            if xx < 0 || xx >= w as isize {
                continue;
            }
            let (xx, yy) = (xx as usize, yy as usize);
            if CfaColor::at(xx, yy).channel() != c {
                continue;
            }
            let wgt = ((2 - dx.abs()) * (2 - dy.abs())) as f64;
            acc += wgt * src[yy * w + xx];
            norm += wgt;
        }
    }
    acc / norm
}

/// Raw → sRGB. The raw mosaic is clamped to [0, 1] on entry.
pub fn run_isp(raw: &BayerImage, cfg: &IspConfig) -> Result<ImageBuffer> {
    let rgb = demosaic(&raw.map(|v| v.clamp(0.0, 1.0)))?;
    let balanced = apply_gains(
        &rgb,
        cfg.wb_red_gain,
        cfg.wb_blue_gain,
        cfg.saturation_threshold,
        GainDirection::Apply,
    )?;
    let corrected = apply_ccm(&balanced, cfg, CcmDirection::Forward)?;
    linear_to_srgb(&corrected, cfg)
}
