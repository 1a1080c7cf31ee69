use std::path::Path;

use image::{DynamicImage, ImageBuffer as PixelBuffer, ImageReader, Luma, Rgb};

use super::{ColorSpace, ImageBuffer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }
}

/// Clamps to [0, 1] and rounds half away from zero onto the integer grid.
#[inline]
pub fn quantize(v: f64, depth: BitDepth) -> u16 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * depth.max_value()).round() as u16
}

/// Reads an 8- or 16-bit grayscale or RGB PNG, normalized to [0, 1].
pub fn load_image(path: impl AsRef<Path>, space: Option<ColorSpace>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let space = space.unwrap_or_default();
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);

    let (channels, data): (usize, Vec<f64>) = match decoded {
        DynamicImage::ImageLuma8(b) => {
            (1, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => (
            1,
            b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        ),
        DynamicImage::ImageRgb16(b) => (
            3,
            b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        ),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("color type {:?}", other.color()),
            })
        }
    };
    ImageBuffer::from_vec(w, h, channels, space, data)
}

/// Writes a PNG at the requested depth. Values are clamped, never wrapped.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let q = img.data().iter().map(|&v| quantize(v, depth));
    let result = match (depth, img.channels()) {
        (BitDepth::Eight, 1) => {
            PixelBuffer::<Luma<u8>, _>::from_raw(w, h, q.map(|v| v as u8).collect::<Vec<_>>())
                .expect("buffer length matches")
                .save(path)
        }
        (BitDepth::Eight, _) => {
            PixelBuffer::<Rgb<u8>, _>::from_raw(w, h, q.map(|v| v as u8).collect::<Vec<_>>())
                .expect("buffer length matches")
                .save(path)
        }
        (BitDepth::Sixteen, 1) => {
            PixelBuffer::<Luma<u16>, _>::from_raw(w, h, q.collect::<Vec<_>>())
                .expect("buffer length matches")
                .save(path)
        }
        (BitDepth::Sixteen, _) => PixelBuffer::<Rgb<u16>, _>::from_raw(w, h, q.collect::<Vec<_>>())
            .expect("buffer length matches")
            .save(path),
    };
    result.map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn write_raw16(path: &Path, values: &[u16]) {
        PixelBuffer::<Luma<u16>, _>::from_raw(values.len() as u32, 1, values.to_vec())
            .unwrap()
            .save(path)
            .unwrap();
    }

    #[test]
    fn sixteen_bit_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        write_raw16(&p, &[65535, 0, 32768]);
        let img = load_image(&p, None).unwrap();
        assert_eq!(img.space(), ColorSpace::Srgb);
        assert_eq!(img.get(0, 0, 0), 1.0);
        assert_eq!(img.get(1, 0, 0), 0.0);
        assert!((img.get(2, 0, 0) - 32768.0 / 65535.0).abs() < 1e-15);
        assert!((img.get(2, 0, 0) - 0.500008).abs() < 1e-6);
    }

    #[test]
    fn eight_bit_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.png");
        PixelBuffer::<Rgb<u8>, _>::from_raw(1, 1, vec![0u8, 0, 0])
            .unwrap()
            .save(&p)
            .unwrap();
        let img = load_image(&p, Some(ColorSpace::LinearRgb)).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.space(), ColorSpace::LinearRgb);
        assert_eq!(img.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn quantization_rule() {
        assert_eq!(quantize(1.0, BitDepth::Sixteen), 65535);
        assert_eq!(quantize(0.5, BitDepth::Eight), 128);
        assert_eq!(quantize(1.7, BitDepth::Eight), 255);
        assert_eq!(quantize(-0.2, BitDepth::Eight), 0);
    }

    #[test]
    fn sixteen_bit_round_trip_bound() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("row.png");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let row: Vec<f64> = (0..4096).map(|_| rng.random::<f64>()).collect();
        let img = ImageBuffer::from_vec(4096, 1, 1, ColorSpace::Srgb, row.clone()).unwrap();
        save_image(&img, &p, BitDepth::Sixteen).unwrap();
        let back = load_image(&p, None).unwrap();
        let worst = row
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1.0 / 131070.0 + 1e-15, "worst = {worst}");
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(load_image("/nonexistent/never.png", None).is_err());
    }

    #[test]
    fn rgba_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgba.png");
        image::RgbaImage::from_raw(1, 1, vec![1, 2, 3, 4])
            .unwrap()
            .save(&p)
            .unwrap();
        assert!(matches!(
            load_image(&p, None),
            Err(Error::UnsupportedFormat { .. })
        ));
    }
}
