//! Conversion of audio into the three per-frame input streams (raw chunk,
//! MFCC, MFCC delta) and assembly of normalised windows.

use serde::{Deserialize, Serialize};

use crate::mfcc::{MfccConfig, MfccExtractor};
use crate::{Error, Result};

pub const CANONICAL_RATE_HZ: u32 = 8000;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub sample_rate_hz: u32,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn new(id: impl Into<String>, sample_rate_hz: u32, samples: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            sample_rate_hz,
            samples,
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameSpec {
    pub frame_len_ms: u32,
    pub hop_ms: u32,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            frame_len_ms: 25,
            hop_ms: 10,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hop_ms == 0 || self.frame_len_ms <= self.hop_ms || 1000 % self.hop_ms != 0 {
            return Err(Error::Config(format!(
                "frame: need frame_len_ms > hop_ms > 0 with hop_ms dividing 1000, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn fps(&self) -> u32 {
        1000 / self.hop_ms
    }

    pub fn hop_secs(&self) -> f64 {
        self.hop_ms as f64 / 1000.0
    }

    pub fn hop_samples(&self, rate: u32) -> usize {
        (rate as usize * self.hop_ms as usize) / 1000
    }

    pub fn frame_samples(&self, rate: u32) -> usize {
        (rate as usize * self.frame_len_ms as usize) / 1000
    }

    pub fn frame_count(&self, n_samples: usize, rate: u32) -> usize {
        n_samples.div_ceil(self.hop_samples(rate))
    }
}

/// Which of the three input streams participate in a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Streams {
    pub raw: bool,
    pub mfcc: bool,
    pub delta: bool,
}

impl Streams {
    pub const ALL: Streams = Streams {
        raw: true,
        mfcc: true,
        delta: true,
    };
    pub const RAW: Streams = Streams {
        raw: true,
        mfcc: false,
        delta: false,
    };

    pub fn is_empty(&self) -> bool {
        !(self.raw || self.mfcc || self.delta)
    }

    pub fn dim(&self, raw_len: usize, n_coeffs: usize) -> usize {
        self.raw as usize * raw_len + (self.mfcc as usize + self.delta as usize) * n_coeffs
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.raw {
            v.push("raw");
        }
        if self.mfcc {
            v.push("mfcc");
        }
        if self.delta {
            v.push("delta");
        }
        v
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut s = Streams {
            raw: false,
            mfcc: false,
            delta: false,
        };
        for n in names {
            match n.as_ref() {
                "raw" => s.raw = true,
                "mfcc" => s.mfcc = true,
                "delta" => s.delta = true,
                other => return Err(Error::Config(format!("unknown stream {other:?}"))),
            }
        }
        if s.is_empty() {
            return Err(Error::Config("at least one stream is required".into()));
        }
        Ok(s)
    }
}

/// One 10 ms step of input: hop-aligned raw chunk mapped into [0, 1], MFCCs and deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub raw: Vec<f64>,
    pub mfcc: Vec<f64>,
    pub delta: Vec<f64>,
}

impl FeatureFrame {
    pub fn zeros(raw_len: usize, n_coeffs: usize) -> Self {
        Self {
            raw: vec![0.0; raw_len],
            mfcc: vec![0.0; n_coeffs],
            delta: vec![0.0; n_coeffs],
        }
    }

    /// Concatenation of the selected streams in raw, mfcc, delta order.
    pub fn stream_vector(&self, streams: Streams) -> Vec<f64> {
        let mut v = Vec::with_capacity(streams.dim(self.raw.len(), self.mfcc.len()));
        self.extend_streams(streams, &mut v);
        v
    }

    pub fn extend_streams(&self, streams: Streams, out: &mut Vec<f64>) {
        if streams.raw {
            out.extend_from_slice(&self.raw);
        }
        if streams.mfcc {
            out.extend_from_slice(&self.mfcc);
        }
        if streams.delta {
            out.extend_from_slice(&self.delta);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputWindow {
    pub frames: Vec<FeatureFrame>,
    pub start_frame: usize,
}

/// A training item: the current window, the frames of the following window
/// (whose raw chunks are the future-audio target) and the current labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    pub input: InputWindow,
    pub future: Vec<FeatureFrame>,
    pub labels: Vec<u8>,
}

impl TrainingWindow {
    pub fn future_raw(&self) -> impl Iterator<Item = &[f64]> {
        self.future.iter().map(|f| f.raw.as_slice())
    }
}

/// Per-dimension min/max of the MFCC and delta streams over a training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mfcc_min: Vec<f64>,
    pub mfcc_max: Vec<f64>,
    pub delta_min: Vec<f64>,
    pub delta_max: Vec<f64>,
}

/// Left-aligned analysis frames; frame `t` covers samples
/// `[t*hop, t*hop + frame_len)` with zeros past the end of the clip.
pub fn frame_signal(clip: &AudioClip, spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    if clip.samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    let hop = spec.hop_samples(clip.sample_rate_hz);
    let len = spec.frame_samples(clip.sample_rate_hz);
    let n = spec.frame_count(clip.samples.len(), clip.sample_rate_hz);
    Ok((0..n)
        .map(|t| {
            let start = t * hop;
            let end = (start + len).min(clip.samples.len());
            let mut frame = clip.samples[start..end].to_vec();
            frame.resize(len, 0.0);
            frame
        })
        .collect())
}

/// Non-overlapping hop-sized chunks mapped by `s -> (s + 1) / 2`.
pub fn raw_chunks(clip: &AudioClip, spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    if clip.samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    let hop = spec.hop_samples(clip.sample_rate_hz);
    let n = spec.frame_count(clip.samples.len(), clip.sample_rate_hz);
    Ok((0..n)
        .map(|t| {
            (t * hop..(t + 1) * hop)
                .map(|i| (clip.samples.get(i).copied().unwrap_or(0.0) + 1.0) / 2.0)
                .collect()
        })
        .collect())
}

/// Delta regression over +-2 neighbours with edge frames replicated.
pub fn compute_deltas(seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    const N: isize = 2;
    let denom = 2.0 * (1..=N).map(|n| (n * n) as f64).sum::<f64>();
    let last = seq.len() as isize - 1;
    let at = |t: isize| &seq[t.clamp(0, last) as usize];
    (0..seq.len() as isize)
        .map(|t| {
            let dim = seq[t as usize].len();
            (0..dim)
                .map(|d| {
                    let num: f64 = (1..=N).map(|n| n as f64 * (at(t + n)[d] - at(t - n)[d])).sum();
                    num / denom
                })
                .collect()
        })
        .collect()
}

/// Extracts unnormalised feature frames for a whole clip.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    spec: FrameSpec,
    mfcc: MfccExtractor,
    rate: u32,
}

impl FeatureExtractor {
    pub fn new(spec: FrameSpec, cfg: MfccConfig) -> Result<Self> {
        spec.validate()?;
        let mfcc = MfccExtractor::new(cfg, spec.frame_samples(CANONICAL_RATE_HZ), CANONICAL_RATE_HZ)?;
        Ok(Self {
            spec,
            mfcc,
            rate: CANONICAL_RATE_HZ,
        })
    }

    pub fn frame_spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn raw_len(&self) -> usize {
        self.spec.hop_samples(self.rate)
    }

    pub fn n_coeffs(&self) -> usize {
        self.mfcc.config().n_coeffs
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<Vec<FeatureFrame>> {
        if clip.sample_rate_hz != self.rate {
            return Err(Error::UnsupportedFormat(format!(
                "expected {} Hz audio, got {} Hz",
                self.rate, clip.sample_rate_hz
            )));
        }
        let frames = frame_signal(clip, &self.spec)?;
        let mfccs = frames.iter().map(|f| self.mfcc.compute(f)).collect::<Result<Vec<_>>>()?;
        let deltas = compute_deltas(&mfccs);
        let chunks = raw_chunks(clip, &self.spec)?;
        Ok(chunks
            .into_iter()
            .zip(mfccs)
            .zip(deltas)
            .map(|((raw, mfcc), delta)| FeatureFrame { raw, mfcc, delta })
            .collect())
    }
}

pub fn fit_normalization<S: AsRef<[FeatureFrame]>>(sequences: &[S]) -> Result<NormalizationStats> {
    let mut frames = sequences.iter().flat_map(|s| s.as_ref().iter());
    let first = frames.next().ok_or(Error::NoData)?;
    let mut stats = NormalizationStats {
        mfcc_min: first.mfcc.clone(),
        mfcc_max: first.mfcc.clone(),
        delta_min: first.delta.clone(),
        delta_max: first.delta.clone(),
    };
    for f in frames {
        for (i, &v) in f.mfcc.iter().enumerate() {
            stats.mfcc_min[i] = stats.mfcc_min[i].min(v);
            stats.mfcc_max[i] = stats.mfcc_max[i].max(v);
        }
        for (i, &v) in f.delta.iter().enumerate() {
            stats.delta_min[i] = stats.delta_min[i].min(v);
            stats.delta_max[i] = stats.delta_max[i].max(v);
        }
    }
    Ok(stats)
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        0.5
    } else {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

impl NormalizationStats {
    pub fn apply_frame(&self, frame: &FeatureFrame) -> FeatureFrame {
        FeatureFrame {
            raw: frame.raw.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            mfcc: frame
                .mfcc
                .iter()
                .enumerate()
                .map(|(i, &v)| scale(v, self.mfcc_min[i], self.mfcc_max[i]))
                .collect(),
            delta: frame
                .delta
                .iter()
                .enumerate()
                .map(|(i, &v)| scale(v, self.delta_min[i], self.delta_max[i]))
                .collect(),
        }
    }
}

/// Min-max scales MFCC and delta streams into [0, 1]; constant dimensions map to 0.5.
pub fn apply_normalization(frames: &[FeatureFrame], stats: &NormalizationStats) -> Vec<FeatureFrame> {
    frames.iter().map(|f| stats.apply_frame(f)).collect()
}

/// Number of windows `build_training_windows` yields for a given length.
pub fn training_window_count(frame_count: usize, window: usize, hop: usize) -> usize {
    if frame_count < 2 * window {
        0
    } else {
        (frame_count - 2 * window) / hop + 1
    }
}

/// Overlapping training windows. Each start `s` is a multiple of `hop` with
/// `s + 2*window <= frame_count`.
pub fn build_training_windows(
    features: &[FeatureFrame],
    labels: &[u8],
    window: usize,
    hop: usize,
) -> Result<Vec<TrainingWindow>> {
    if window == 0 || hop == 0 {
        return Err(Error::Config("window and hop must be positive".into()));
    }
    if labels.len() != features.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    if features.len() < 2 * window {
        return Err(Error::TooShort {
            frames: features.len(),
            needed: 2 * window,
        });
    }
    Ok((0..training_window_count(features.len(), window, hop))
        .map(|i| {
            let s = i * hop;
            TrainingWindow {
                input: InputWindow {
                    frames: features[s..s + window].to_vec(),
                    start_frame: s,
                },
                future: features[s + window..s + 2 * window].to_vec(),
                labels: labels[s..s + window].to_vec(),
            }
        })
        .collect())
}
