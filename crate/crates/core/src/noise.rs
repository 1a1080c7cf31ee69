//! Heteroscedastic Gaussian sensor noise.
//!
//! A clean raw value `x` is observed as `x + n` with
//! `n ~ N(0, sigma_s·x + sigma_r2)`, the usual Gaussian approximation of
//! shot noise plus read noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BayerImage, ImageBuffer};

/// Shot-noise slope bounds used when sampling `sigma_s` log-uniformly.
pub const SIGMA_S_MIN: f64 = 1.25e-4;
pub const SIGMA_S_MAX: f64 = 2.0e-4;
/// `ln(sigma_r2) | ln(sigma_s) ~ N(READ_SLOPE·ln(sigma_s) + READ_OFFSET, READ_SD)`.
pub const READ_SLOPE: f64 = 2.18;
pub const READ_OFFSET: f64 = 1.2;
pub const READ_SD: f64 = 0.26;

/// Reproducible random source: ChaCha20 keyed from a 64-bit seed
/// (`ChaCha20Rng::seed_from_u64`) with an explicit 64-bit stream id.
///
/// Independent streams of the same seed never overlap, so work that is split
/// across workers draws from `SimRng::stream(seed, id)` with a fixed id per
/// unit of work and stays identical regardless of scheduling.
#[derive(Debug, Clone)]
pub struct SimRng(ChaCha20Rng);

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self::stream(seed, 0)
    }

    pub fn stream(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        SimRng(rng)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        self.0.random_range(lo..=hi)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn inner(&mut self) -> &mut ChaCha20Rng {
        &mut self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma_s: f64,
    pub sigma_r2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_d: Option<f64>,
}

impl NoiseParams {
    pub fn new(sigma_s: f64, sigma_r2: f64) -> Result<Self> {
        let p = Self {
            sigma_s,
            sigma_r2,
            g_a: None,
            g_d: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        Self {
            sigma_s: 0.0,
            sigma_r2: 0.0,
            g_a: None,
            g_d: None,
        }
    }

    /// Parameters implied by analog and digital gain: `sigma_s = g_a·g_d`,
    /// `sigma_r2 = (g_a·g_d)²`.
    pub fn from_gains(g_a: f64, g_d: f64) -> Result<Self> {
        let s = g_a * g_d;
        let p = Self {
            sigma_s: s,
            sigma_r2: s * s,
            g_a: Some(g_a),
            g_d: Some(g_d),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_s >= 0.0 && self.sigma_r2 >= 0.0) {
            return Err(Error::invalid(format!(
                "noise parameters must be non-negative (sigma_s = {}, sigma_r2 = {})",
                self.sigma_s, self.sigma_r2
            )));
        }
        if let (Some(a), Some(d)) = (self.g_a, self.g_d) {
            let s = a * d;
            if (self.sigma_s - s).abs() > 1e-9 || (self.sigma_r2 - s * s).abs() > 1e-9 {
                return Err(Error::invalid("noise parameters disagree with the gains"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn variance_at(&self, x: f64) -> f64 {
        (self.sigma_s * x + self.sigma_r2).max(0.0)
    }
}

/// Draws `sigma_s` log-uniformly in `[SIGMA_S_MIN, SIGMA_S_MAX]` and
/// `ln(sigma_r2)` from the conditional Gaussian.
pub fn sample_noise_params(rng: &mut SimRng) -> NoiseParams {
    let log_s = rng.uniform(SIGMA_S_MIN.ln(), SIGMA_S_MAX.ln());
    let mean = READ_SLOPE * log_s + READ_OFFSET;
    let log_r2 = Normal::new(mean, READ_SD)
        .expect("finite mean and positive sd")
        .sample(rng.inner());
    NoiseParams {
        sigma_s: log_s.exp(),
        sigma_r2: log_r2.exp(),
        g_a: None,
        g_d: None,
    }
}

/// Noise parameters of a short exposure re-amplified by `ratio`: the digital
/// gain is multiplied by `ratio`, so `sigma_s` scales by `ratio` and
/// `sigma_r2` by `ratio²`.
pub fn scale_for_exposure(params: &NoiseParams, ratio: f64) -> Result<NoiseParams> {
    if !(ratio >= 1.0) {
        return Err(Error::invalid(format!(
            "exposure ratio must be >= 1, got {ratio}"
        )));
    }
    Ok(NoiseParams {
        sigma_s: params.sigma_s * ratio,
        sigma_r2: params.sigma_r2 * ratio * ratio,
        g_a: params.g_a,
        g_d: params.g_d.map(|g| g * ratio),
    })
}

/// Buffers whose samples can receive per-sample noise.
pub trait NoiseTarget: Clone {
    fn samples_mut(&mut self) -> &mut [f64];
}

impl NoiseTarget for ImageBuffer {
    fn samples_mut(&mut self) -> &mut [f64] {
        self.data_mut()
    }
}

impl NoiseTarget for BayerImage {
    fn samples_mut(&mut self) -> &mut [f64] {
        self.data_mut()
    }
}

/// Adds independent heteroscedastic noise to every sample. The result is
/// not clamped.
pub fn add_noise<T: NoiseTarget>(img: &T, params: &NoiseParams, rng: &mut SimRng) -> Result<T> {
    params.validate()?;
    let mut out = img.clone();
    if params.sigma_s == 0.0 && params.sigma_r2 == 0.0 {
        return Ok(out);
    }
    for v in out.samples_mut() {
        let sd = params.variance_at(v.max(0.0)).sqrt();
        *v += sd * rng.standard_normal();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseBin {
    /// Mean clean intensity of the samples in the bin.
    pub intensity: f64,
    pub variance: f64,
    pub count: usize,
    /// Fewer than [`MIN_BIN_SAMPLES`] samples fell into the bin.
    pub empty: bool,
}

pub const MIN_BIN_SAMPLES: usize = 100;

/// Buckets samples by clean intensity into `bins` equal-width bins over
/// [0, 1] and reports the sample variance of `noisy − clean` per bin.
pub fn estimate_noise_curve(
    noisy: &ImageBuffer,
    clean: &ImageBuffer,
    bins: usize,
) -> Result<Vec<NoiseBin>> {
    noisy.ensure_same_shape(clean, "noise curve")?;
    if bins < 2 {
        return Err(Error::invalid("noise curve needs at least 2 bins"));
    }
    let mut sum_x = vec![0.0; bins];
    let mut sum_d = vec![0.0; bins];
    let mut sum_d2 = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (&y, &x) in noisy.data().iter().zip(clean.data()) {
        let b = ((x.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        let d = y - x;
        sum_x[b] += x;
        sum_d[b] += d;
        sum_d2[b] += d * d;
        count[b] += 1;
    }
    Ok((0..bins)
        .map(|b| {
            let n = count[b];
            let center = (b as f64 + 0.5) / bins as f64;
            if n < MIN_BIN_SAMPLES {
                return NoiseBin {
                    intensity: if n > 0 { sum_x[b] / n as f64 } else { center },
                    variance: 0.0,
                    count: n,
                    empty: true,
                };
            }
            let nf = n as f64;
            let mean = sum_d[b] / nf;
            NoiseBin {
                intensity: sum_x[b] / nf,
                variance: ((sum_d2[b] - nf * mean * mean) / (nf - 1.0)).max(0.0),
                count: n,
                empty: false,
            }
        })
        .collect())
}

/// Least-squares line `variance = slope·intensity + intercept` over the
/// non-empty bins.
pub fn fit_noise_line(bins: &[NoiseBin]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| !b.empty)
        .map(|b| (b.intensity, b.variance))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
