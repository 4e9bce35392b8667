//! Frame error rate, detection cost, and speech segment tracks.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::FrameSpec;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const MISS_WEIGHT: f64 = 0.75;
pub const FALSE_ALARM_WEIGHT: f64 = 0.25;

/// Per-frame speech probabilities over a whole utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrack {
    pub probabilities: Vec<f64>,
    pub threshold: f64,
}

impl PredictionTrack {
    pub fn new(probabilities: Vec<f64>) -> Self {
        Self {
            probabilities,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Speech iff probability ≥ threshold.
    pub fn labels(&self) -> Vec<u8> {
        self.probabilities.iter().map(|&p| (p >= self.threshold) as u8).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentLabel {
    Speech,
    Nonspeech,
}

impl SegmentLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentLabel::Speech => "speech",
            SegmentLabel::Nonspeech => "nonspeech",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "speech" => Some(SegmentLabel::Speech),
            "nonspeech" => Some(SegmentLabel::Nonspeech),
            _ => None,
        }
    }

    pub fn from_frame(label: u8) -> Self {
        if label != 0 {
            SegmentLabel::Speech
        } else {
            SegmentLabel::Nonspeech
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechSegment {
    pub start_sec: f64,
    pub end_sec: f64,
    pub label: SegmentLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub p_miss: f64,
    pub p_fa: f64,
    pub dcf: f64,
    pub fer: f64,
    pub speech_frames: usize,
    pub nonspeech_frames: usize,
    pub missed_frames: usize,
    pub false_alarm_frames: usize,
}

impl MetricsReport {
    pub fn error_frames(&self) -> usize {
        self.missed_frames + self.false_alarm_frames
    }

    pub fn total_frames(&self) -> usize {
        self.speech_frames + self.nonspeech_frames
    }

    /// Pools frame counts from several utterances.
    pub fn micro_average(reports: &[MetricsReport]) -> Result<MetricsReport> {
        let mut c = Counts::default();
        for r in reports {
            c.speech += r.speech_frames;
            c.nonspeech += r.nonspeech_frames;
            c.missed += r.missed_frames;
            c.false_alarms += r.false_alarm_frames;
        }
        c.report()
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Counts {
    speech: usize,
    nonspeech: usize,
    missed: usize,
    false_alarms: usize,
}

impl Counts {
    fn tally(predicted: &[u8], reference: &[u8]) -> Result<Self> {
        check_lengths(predicted, reference)?;
        let mut c = Counts::default();
        for (&p, &r) in predicted.iter().zip(reference) {
            match (r != 0, p != 0) {
                (true, false) => c.missed += 1,
                (false, true) => c.false_alarms += 1,
                _ => {}
            }
            if r != 0 {
                c.speech += 1;
            } else {
                c.nonspeech += 1;
            }
        }
        Ok(c)
    }

    fn report(self) -> Result<MetricsReport> {
        if self.speech == 0 {
            return Err(Error::DegenerateReference("speech"));
        }
        if self.nonspeech == 0 {
            return Err(Error::DegenerateReference("non-speech"));
        }
        let p_miss = self.missed as f64 / self.speech as f64;
        let p_fa = self.false_alarms as f64 / self.nonspeech as f64;
        Ok(MetricsReport {
            p_miss,
            p_fa,
            dcf: dcf(p_miss, p_fa),
            fer: (self.missed + self.false_alarms) as f64 / (self.speech + self.nonspeech) as f64,
            speech_frames: self.speech,
            nonspeech_frames: self.nonspeech,
            missed_frames: self.missed,
            false_alarm_frames: self.false_alarms,
        })
    }
}

fn check_lengths(a: &[u8], b: &[u8]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyTrack);
    }
    Ok(())
}

pub fn dcf(p_miss: f64, p_fa: f64) -> f64 {
    MISS_WEIGHT * p_miss + FALSE_ALARM_WEIGHT * p_fa
}

pub fn frame_error_rate(predicted: &[u8], reference: &[u8]) -> Result<f64> {
    check_lengths(predicted, reference)?;
    let wrong = predicted.iter().zip(reference).filter(|(p, r)| (**p != 0) != (**r != 0)).count();
    Ok(wrong as f64 / predicted.len() as f64)
}

/// Frame-weighted miss / false-alarm rates and their weighted cost.
pub fn detection_cost(predicted: &[u8], reference: &[u8]) -> Result<MetricsReport> {
    Counts::tally(predicted, reference)?.report()
}

/// Maximal runs of equal labels; frame `t` spans `[t·hop, (t+1)·hop)`.
pub fn labels_to_segments(labels: &[u8], spec: &FrameSpec) -> Vec<SpeechSegment> {
    let hop = spec.hop_secs();
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=labels.len() {
        if t == labels.len() || (labels[t] != 0) != (labels[start] != 0) {
            out.push(SpeechSegment {
                start_sec: start as f64 * hop,
                end_sec: t as f64 * hop,
                label: SegmentLabel::from_frame(labels[start]),
            });
            start = t;
        }
    }
    out
}

pub fn format_segments(segments: &[SpeechSegment]) -> String {
    let mut s = String::new();
    for seg in segments {
        let _ = writeln!(s, "{:.3}\t{:.3}\t{}", seg.start_sec, seg.end_sec, seg.label.as_str());
    }
    s
}

pub fn write_segments(path: &Path, segments: &[SpeechSegment]) -> Result<()> {
    std::fs::write(path, format_segments(segments)).map_err(|e| Error::io(path, e))
}

/// One probability per line.
pub fn format_probabilities(track: &PredictionTrack) -> String {
    let mut s = String::with_capacity(track.len() * 10);
    for p in &track.probabilities {
        let _ = writeln!(s, "{p:.6}");
    }
    s
}
