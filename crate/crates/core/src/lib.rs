//! Dual-camera capture synthesis and classical joint deblurring/denoising.
//!
//! A long exposure and a synchronized short-exposure burst are synthesized
//! from ordered video frames, then restored by trajectory deconvolution of
//! the long exposure, aligned merging of the burst, and fusion of the two.

pub mod cli;
pub mod config;
pub mod denoise;
pub mod error;
pub mod flow;
pub mod fusion;
pub mod imaging;
pub mod isp;
pub mod metrics;
pub mod noise;
pub mod scene;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
