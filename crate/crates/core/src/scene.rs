//! Procedural test scenes.
//!
//! [`Texture`] is a smooth, band-limited color pattern defined on the
//! continuous plane, so it can be rendered at any sub-pixel offset without
//! resampling error. [`moving_sequence`] renders ordered frames of a pattern
//! sliding along a path, the input format expected by capture synthesis.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{ColorSpace, ImageBuffer};

#[derive(Debug, Clone, Copy)]
struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    amp: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Texture {
    waves: Vec<Wave>,
    base: [f64; 3],
    scale: f64,
}

impl Texture {
    pub fn new(seed: u64) -> Self {
        Self::with_band(seed, 5.0, 40.0, 32)
    }

    /// Sum of `count` plane waves with wavelengths in `[min_wl, max_wl]` px.
    pub fn with_band(seed: u64, min_wl: f64, max_wl: f64, count: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..count)
            .map(|_| {
                let wl = min_wl * (max_wl / min_wl).powf(rng.random::<f64>());
                let theta = rng.random::<f64>() * TAU;
                let k = TAU / wl;
                let common = rng.random::<f64>();
                let mut amp = [0.0; 3];
                for a in &mut amp {
                    *a = 0.7 * common + 0.3 * rng.random::<f64>();
                }
                Wave {
                    kx: k * theta.cos(),
                    ky: k * theta.sin(),
                    phase: rng.random::<f64>() * TAU,
                    amp,
                }
            })
            .collect::<Vec<_>>();
        let mut base = [0.0; 3];
        for b in &mut base {
            *b = 0.4 + 0.2 * rng.random::<f64>();
        }
        let peak: f64 = waves
            .iter()
            .map(|w| w.amp.iter().cloned().fold(0.0, f64::max))
            .sum();
        let scale = 0.35 / (peak / (count as f64).sqrt()).max(1e-9) / 3.0;
        Self { waves, base, scale }
    }

    /// Pattern value at continuous position `(x, y)`, kept inside (0, 1).
    pub fn value(&self, x: f64, y: f64, c: usize) -> f64 {
        let s: f64 = self
            .waves
            .iter()
            .map(|w| w.amp[c] * (w.kx * x + w.ky * y + w.phase).sin())
            .sum();
        let v = self.base[c] + self.scale * s;
        // soft limit keeps values away from the clipping points
        0.5 + 0.42 * ((v - 0.5) / 0.42).tanh()
    }

    /// Renders `out(x, y) = value(x + ox, y + oy)`.
    pub fn render(&self, width: usize, height: usize, ox: f64, oy: f64) -> ImageBuffer {
        ImageBuffer::from_fn(width, height, 3, ColorSpace::Srgb, |x, y, c| {
            self.value(x as f64 + ox, y as f64 + oy, c)
        })
    }
}

/// `frames` ordered frames of `texture` translating by `(vx, vy)` pixels per
/// frame, centred so the middle frame has zero offset.
///
/// Frame `j` shows the pattern moved by `(j − mid)·v`, i.e.
/// `frame_j(p) = value(p − (j − mid)·v)`.
pub fn moving_sequence(
    texture: &Texture,
    width: usize,
    height: usize,
    frames: usize,
    vx: f64,
    vy: f64,
) -> Vec<ImageBuffer> {
    let mid = (frames / 2) as f64;
    (0..frames)
        .map(|j| {
            let t = j as f64 - mid;
            texture.render(width, height, -t * vx, -t * vy)
        })
        .collect()
}
