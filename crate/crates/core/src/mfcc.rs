//! Mel-frequency cepstral coefficients for a single analysis frame.
//!
//! Pipeline: pre-emphasis, Hamming window, zero-padded FFT magnitude,
//! triangular mel filterbank spanning 0 Hz to Nyquist, floored natural log,
//! orthonormal DCT-II truncated to the first `n_coeffs` coefficients.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfccConfig {
    pub n_coeffs: usize,
    pub n_filters: usize,
    pub fft_size: usize,
    pub pre_emphasis: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_coeffs: 13,
            n_filters: 26,
            fft_size: 256,
            pre_emphasis: 0.97,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self, frame_len: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("mfcc: {m}")));
        if self.n_coeffs == 0 || self.n_coeffs > self.n_filters {
            return bad("need 0 < n_coeffs <= n_filters");
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < frame_len {
            return bad("fft_size must be a power of two covering the frame");
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return bad("pre_emphasis must lie in [0, 1)");
        }
        if self.log_floor <= 0.0 {
            return bad("log_floor must be positive");
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Precomputed window, filterbank and DCT for a fixed frame length.
#[derive(Clone)]
pub struct MfccExtractor {
    cfg: MfccConfig,
    frame_len: usize,
    window: Vec<f64>,
    /// `n_filters x (fft_size/2 + 1)`
    filterbank: Vec<Vec<f64>>,
    /// `n_coeffs x n_filters`
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor")
            .field("cfg", &self.cfg)
            .field("frame_len", &self.frame_len)
            .finish()
    }
}

impl MfccExtractor {
    pub fn new(cfg: MfccConfig, frame_len: usize, sample_rate_hz: u32) -> Result<Self> {
        cfg.validate(frame_len)?;
        let window = (0..frame_len)
            .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (frame_len as f64 - 1.0)).cos())
            .collect();

        let n_bins = cfg.fft_size / 2 + 1;
        let nyquist = sample_rate_hz as f64 / 2.0;
        let mel_hi = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..cfg.n_filters + 2)
            .map(|i| mel_to_hz(mel_hi * i as f64 / (cfg.n_filters + 1) as f64))
            .collect();
        let filterbank = (0..cfg.n_filters)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * sample_rate_hz as f64 / cfg.fft_size as f64;
                        if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();

        let nf = cfg.n_filters as f64;
        let dct = (0..cfg.n_coeffs)
            .map(|i| {
                let scale = if i == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                (0..cfg.n_filters)
                    .map(|n| scale * (PI * i as f64 * (2.0 * n as f64 + 1.0) / (2.0 * nf)).cos())
                    .collect()
            })
            .collect();

        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
        Ok(Self {
            cfg,
            frame_len,
            window,
            filterbank,
            dct,
            fft,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.cfg
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// Log mel energies before the DCT.
    pub fn log_mel(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() != self.frame_len {
            return Err(Error::ShapeMismatch {
                expected: format!("{} samples", self.frame_len),
                got: format!("{} samples", frame.len()),
            });
        }
        let mut buf = vec![Complex::new(0.0, 0.0); self.cfg.fft_size];
        let mut prev = 0.0;
        for (n, (&x, &w)) in frame.iter().zip(&self.window).enumerate() {
            let emph = if n == 0 { x } else { x - self.cfg.pre_emphasis * prev };
            prev = x;
            buf[n] = Complex::new(emph * w, 0.0);
        }
        self.fft.process(&mut buf);
        let mags: Vec<f64> = buf[..self.cfg.fft_size / 2 + 1].iter().map(|c| c.norm()).collect();
        Ok(self
            .filterbank
            .iter()
            .map(|weights| {
                let e: f64 = weights.iter().zip(&mags).map(|(w, m)| w * m).sum();
                e.max(self.cfg.log_floor).ln()
            })
            .collect())
    }

    pub fn compute(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let log_mel = self.log_mel(frame)?;
        Ok(self
            .dct
            .iter()
            .map(|row| row.iter().zip(&log_mel).map(|(a, b)| a * b).sum())
            .collect())
    }
}
