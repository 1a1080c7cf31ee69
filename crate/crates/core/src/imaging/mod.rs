//! Image containers shared by every stage of the pipeline.
//!
//! [`ImageBuffer`] stores interleaved row-major `f64` samples together with a
//! tag describing which domain the values live in. [`BayerImage`] is the
//! single-plane RGGB mosaic produced between unprocessing and the ISP.

mod io;
pub mod sample;
mod tensor;
mod timeline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_image, quantize, save_image, BitDepth};
pub use tensor::{read_tensor, write_tensor, Tensor, TENSOR_MAGIC};
pub use timeline::CaptureTimeline;

/// Domain of the values stored in an [`ImageBuffer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColorSpace {
    /// Display-referred, tone mapped and gamma compressed.
    #[default]
    Srgb,
    /// Scene-linear RGB.
    LinearRgb,
    /// Linear sensor intensities.
    RawLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    space: ColorSpace,
}

impl ImageBuffer {
    pub fn zeros(width: usize, height: usize, channels: usize, space: ColorSpace) -> Self {
        Self::filled(width, height, channels, space, 0.0)
    }

    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        space: ColorSpace,
        value: f64,
    ) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
            space,
        }
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        space: ColorSpace,
        data: Vec<f64>,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "{}x{}x{} image needs {} samples, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            space,
        })
    }

    /// Builds an image by evaluating `f(x, y, c)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        space: ColorSpace,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
            space,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn space(&self) -> ColorSpace {
        self.space
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn with_space(mut self, space: ColorSpace) -> Self {
        self.space = space;
        self
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.index(x, y, 0);
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn ensure_same_shape(&self, other: &ImageBuffer, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    pub fn ensure_space(&self, expected: ColorSpace) -> Result<()> {
        if self.space == expected {
            Ok(())
        } else {
            Err(Error::WrongSpace {
                expected,
                actual: self.space,
            })
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageBuffer {
        ImageBuffer {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone_shape()
        }
    }

    pub fn clamped(&self) -> ImageBuffer {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn channel_mean(&self, c: usize) -> f64 {
        let n = self.width * self.height;
        self.data.iter().skip(c).step_by(self.channels).sum::<f64>() / n.max(1) as f64
    }

    /// Rec.601 luma for RGB images; single-channel images are returned as is.
    pub fn luma(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
            space: self.space,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn clone_shape(&self) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: Vec::new(),
            space: self.space,
        }
    }
}

/// Color sampled at one site of the RGGB mosaic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaColor {
    Red,
    Green,
    Blue,
}

impl CfaColor {
    /// RGGB phase: (0,0) red, (1,0) and (0,1) green, (1,1) blue.
    #[inline]
    pub fn at(x: usize, y: usize) -> CfaColor {
        match (x & 1, y & 1) {
            (0, 0) => CfaColor::Red,
            (1, 1) => CfaColor::Blue,
            _ => CfaColor::Green,
        }
    }

    #[inline]
    pub fn channel(self) -> usize {
        match self {
            CfaColor::Red => 0,
            CfaColor::Green => 1,
            CfaColor::Blue => 2,
        }
    }
}

/// Single-plane RGGB raw mosaic with linear intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct BayerImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl BayerImage {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_even(width, height)?;
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "{width}x{height} mosaic needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_vec(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BayerImage {
        BayerImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// View the mosaic as a one-channel raw buffer.
    pub fn to_buffer(&self) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.clone(),
            space: ColorSpace::RawLinear,
        }
    }
}

pub(crate) fn check_even(width: usize, height: usize) -> Result<()> {
    if width % 2 != 0 || height % 2 != 0 || width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "Bayer data needs non-zero even dimensions, got {width}x{height}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rggb_phase() {
        assert_eq!(CfaColor::at(0, 0), CfaColor::Red);
        assert_eq!(CfaColor::at(1, 0), CfaColor::Green);
        assert_eq!(CfaColor::at(0, 1), CfaColor::Green);
        assert_eq!(CfaColor::at(1, 1), CfaColor::Blue);
        assert_eq!(CfaColor::at(4, 6), CfaColor::Red);
        assert_eq!(CfaColor::at(7, 3), CfaColor::Blue);
    }

    #[test]
    fn from_vec_checks_length_and_channels() {
        assert!(ImageBuffer::from_vec(2, 2, 3, ColorSpace::Srgb, vec![0.0; 11]).is_err());
        assert!(ImageBuffer::from_vec(2, 2, 2, ColorSpace::Srgb, vec![0.0; 8]).is_err());
        assert!(ImageBuffer::from_vec(2, 2, 3, ColorSpace::Srgb, vec![0.0; 12]).is_ok());
    }

    #[test]
    fn bayer_rejects_odd_dimensions() {
        assert!(BayerImage::filled(3, 4, 0.0).is_err());
        assert!(BayerImage::filled(4, 5, 0.0).is_err());
        assert!(BayerImage::filled(4, 6, 0.0).is_ok());
    }

    #[test]
    fn luma_uses_rec601() {
        let img = ImageBuffer::from_vec(1, 1, 3, ColorSpace::Srgb, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((img.luma().get(0, 0, 0) - 0.299).abs() < 1e-12);
        let gray = ImageBuffer::filled(2, 2, 3, ColorSpace::Srgb, 0.4);
        assert!(gray.luma().data().iter().all(|&v| (v - 0.4).abs() < 1e-12));
    }
}
