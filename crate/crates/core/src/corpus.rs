//! WAV and label ingestion, manifests, splits and the synthetic corpus.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::features::{AudioClip, FrameSpec, CANONICAL_RATE_HZ};
use crate::metrics::{format_segments, SegmentLabel, SpeechSegment};
use crate::{Error, Result};

const DECIMATION_TAPS: usize = 63;

/// Reads a mono 16-bit PCM file at 8 or 16 kHz. 16 kHz audio is low-pass
/// filtered and decimated to 8 kHz.
pub fn load_wav(path: &Path) -> Result<AudioClip> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(std::io::BufReader::new(file)).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!("{} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{:?} {}-bit samples",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.sample_rate != 8000 && spec.sample_rate != 16000 {
        return Err(Error::UnsupportedFormat(format!("{} Hz", spec.sample_rate)));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    let samples = if spec.sample_rate == 16000 {
        decimate_by_two(&samples)
    } else {
        samples
    };
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(AudioClip::new(id, CANONICAL_RATE_HZ, samples))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::CorruptHeader(format!("{}: {io}", path.display())),
        hound::Error::Unsupported => Error::UnsupportedFormat("unsupported WAV encoding".into()),
        other => Error::CorruptHeader(format!("{}: {other}", path.display())),
    }
}

/// Windowed-sinc low-pass at a quarter of the input rate, then every other sample.
pub fn decimate_by_two(x: &[f64]) -> Vec<f64> {
    let m = (DECIMATION_TAPS - 1) as f64;
    let taps: Vec<f64> = (0..DECIMATION_TAPS)
        .map(|n| {
            let k = n as f64 - m / 2.0;
            let sinc = if k == 0.0 { 0.5 } else { (0.5 * PI * k).sin() / (PI * k) };
            let hamming = 0.54 - 0.46 * (2.0 * PI * n as f64 / m).cos();
            sinc * hamming
        })
        .collect();
    let gain: f64 = taps.iter().sum();
    let half = DECIMATION_TAPS / 2;
    (0..x.len().div_ceil(2))
        .map(|i| {
            let centre = 2 * i;
            let mut acc = 0.0;
            for (n, &h) in taps.iter().enumerate() {
                let j = centre as isize + n as isize - half as isize;
                if j >= 0 && (j as usize) < x.len() {
                    acc += h * x[j as usize];
                }
            }
            (acc / gain).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Writes 16-bit mono PCM; samples are clipped to [-1, 1].
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v).map_err(|e| wav_error(path, e))?;
    }
    w.finalize().map_err(|e| wav_error(path, e))
}

/// Parses a tab-separated segment file into sorted, non-overlapping segments.
pub fn load_segments(path: &Path) -> Result<Vec<SpeechSegment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_segments(&text, path)
}

pub fn parse_segments(text: &str, path: &Path) -> Result<Vec<SpeechSegment>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(n, format!("expected 3 fields, found {}", fields.len())));
        }
        let time = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| parse_err(n, format!("bad time {s:?}")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(parse_err(n, format!("time {s:?} must be a nonnegative number")));
            }
            Ok(v)
        };
        let (start, end) = (time(fields[0])?, time(fields[1])?);
        if end <= start {
            return Err(parse_err(n, format!("segment end {end} is not after start {start}")));
        }
        let label = SegmentLabel::parse(fields[2]).ok_or_else(|| parse_err(n, format!("bad label {:?}", fields[2])))?;
        rows.push((
            n,
            SpeechSegment {
                start_sec: start,
                end_sec: end,
                label,
            },
        ));
    }
    rows.sort_by(|a, b| a.1.start_sec.total_cmp(&b.1.start_sec));
    for pair in rows.windows(2) {
        if pair[1].1.start_sec < pair[0].1.end_sec {
            return Err(Error::Overlap {
                path: path.to_path_buf(),
                line: pair[1].0.max(pair[0].0),
            });
        }
    }
    Ok(rows.into_iter().map(|(_, s)| s).collect())
}

fn micros(secs: f64) -> i64 {
    (secs * 1e6).round() as i64
}

/// Frame `t` is speech iff speech segments cover at least half of its hop
/// interval. Times are compared in whole microseconds.
pub fn frame_labels(segments: &[SpeechSegment], frame_count: usize, spec: &FrameSpec) -> Vec<u8> {
    let hop = spec.hop_ms as i64 * 1000;
    let mut covered = vec![0i64; frame_count];
    for s in segments.iter().filter(|s| s.label == SegmentLabel::Speech) {
        let (a, b) = (micros(s.start_sec), micros(s.end_sec));
        if b <= a {
            continue;
        }
        let first = (a / hop).max(0) as usize;
        let last = ((b - 1) / hop) as usize;
        for (t, c) in covered.iter_mut().enumerate().take(last + 1).skip(first) {
            let lo = a.max(t as i64 * hop);
            let hi = b.min((t as i64 + 1) * hop);
            *c += (hi - lo).max(0);
        }
    }
    covered.iter().map(|&c| (2 * c >= hop) as u8).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative paths resolve against the manifest directory.
    pub audio: PathBuf,
    pub labels: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", f.len())));
            }
            let split = Split::parse(f[3].trim()).ok_or_else(|| err(format!("bad split {:?}", f[3])))?;
            if !seen.insert(f[0].to_string()) {
                return Err(err(format!("duplicate id {:?}", f[0])));
            }
            entries.push(ManifestEntry {
                id: f[0].to_string(),
                audio: PathBuf::from(f[1]),
                labels: PathBuf::from(f[2]),
                split,
            });
        }
        let m = Manifest { root, entries };
        for e in &m.entries {
            for p in [m.audio_path(e), m.labels_path(e)] {
                if !p.is_file() {
                    return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
                }
            }
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}",
                e.id,
                e.audio.display(),
                e.labels.display(),
                e.split.as_str()
            );
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn audio_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.audio)
    }

    pub fn labels_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.labels)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

/// Counts for `(train, test, val)`: the first two are rounded, val takes the rest.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadRatios(ratios.to_vec()));
    }
    let train = ((ratios[0] * n as f64).round() as usize).min(n);
    let test = ((ratios[1] * n as f64).round() as usize).min(n - train);
    Ok([train, test, n - train - test])
}

/// Seeded shuffle, then the first block is train, the next test, the rest val.
pub fn split_manifest(manifest: &Manifest, ratios: [f64; 3], seed: u64) -> Result<Manifest> {
    let [train, test, _] = split_counts(manifest.entries.len(), ratios)?;
    let mut order: Vec<usize> = (0..manifest.entries.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = manifest.clone();
    for (rank, &i) in order.iter().enumerate() {
        out.entries[i].split = if rank < train {
            Split::Train
        } else if rank < train + test {
            Split::Test
        } else {
            Split::Val
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonSpeechKind {
    White,
    Pink,
    Tone,
    Silence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub clips: usize,
    pub clip_secs: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    /// Relative standard deviation of the per-sample pitch random walk.
    pub f0_jitter: f64,
    pub am_min_hz: f64,
    pub am_max_hz: f64,
    pub nonspeech: Vec<NonSpeechKind>,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub segment_min_secs: f64,
    pub segment_max_secs: f64,
    pub split_ratios: [f64; 3],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            clips: 100,
            clip_secs: 4.0,
            f0_min_hz: 100.0,
            f0_max_hz: 300.0,
            f0_jitter: 0.002,
            am_min_hz: 2.0,
            am_max_hz: 8.0,
            nonspeech: vec![
                NonSpeechKind::White,
                NonSpeechKind::Pink,
                NonSpeechKind::Tone,
                NonSpeechKind::Silence,
            ],
            snr_min_db: 10.0,
            snr_max_db: 30.0,
            segment_min_secs: 0.3,
            segment_max_secs: 1.2,
            split_ratios: [0.7, 0.2, 0.1],
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        if self.clips == 0 || !(self.clip_secs > 0.0) {
            return bad("clips and clip_secs must be positive");
        }
        if !(0.0 < self.f0_min_hz && self.f0_min_hz <= self.f0_max_hz && self.f0_max_hz < 1000.0) {
            return bad("f0 range must satisfy 0 < min <= max < 1000");
        }
        if !(0.0 < self.am_min_hz && self.am_min_hz <= self.am_max_hz) || self.f0_jitter < 0.0 {
            return bad("bad modulation or jitter settings");
        }
        if self.nonspeech.is_empty() {
            return bad("nonspeech kinds must not be empty");
        }
        if self.snr_min_db > self.snr_max_db {
            return bad("snr_min_db exceeds snr_max_db");
        }
        if !(0.01 <= self.segment_min_secs && self.segment_min_secs <= self.segment_max_secs) {
            return bad("segment durations must satisfy 0.01 <= min <= max");
        }
        split_counts(self.clips, self.split_ratios).map(|_| ())
    }
}

/// One generated clip together with its frame-aligned segments.
#[derive(Debug, Clone)]
pub struct SyntheticClip {
    pub clip: AudioClip,
    pub segments: Vec<SpeechSegment>,
}

fn speech_segment(rng: &mut ChaCha8Rng, spec: &SyntheticSpec, n: usize, rate: f64) -> Vec<f64> {
    let f0 = rng.random_range(spec.f0_min_hz..=spec.f0_max_hz);
    let am = rng.random_range(spec.am_min_hz..=spec.am_max_hz);
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let level = rng.random_range(0.15..0.45);
    let formant = rng.random_range(400.0..1500.0);
    let n_harm = ((3500.0 / f0) as usize).max(1);
    let weights: Vec<f64> = (1..=n_harm)
        .map(|k| {
            let f = k as f64 * f0;
            (1.0 / k as f64) * (1.0 + 2.0 * (-((f - formant) / 400.0).powi(2)).exp())
        })
        .collect();
    let norm: f64 = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let mut ratio = 1.0f64;
    let mut phase = 0.0f64;
    (0..n)
        .map(|i| {
            let jitter: f64 = StandardNormal.sample(rng);
            ratio = (ratio + spec.f0_jitter * jitter).clamp(0.9, 1.1);
            phase += 2.0 * PI * f0 * ratio / rate;
            let t = i as f64 / rate;
            let env = 0.55 + 0.45 * (2.0 * PI * am * t + am_phase).sin();
            let s: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * ((k + 1) as f64 * phase).sin())
                .sum();
            level * env * s / norm
        })
        .collect()
}

fn nonspeech_segment(rng: &mut ChaCha8Rng, kind: NonSpeechKind, n: usize, rate: f64) -> Vec<f64> {
    let level = rng.random_range(0.05..0.3);
    match kind {
        NonSpeechKind::Silence => vec![0.0; n],
        NonSpeechKind::White => (0..n)
            .map(|_| {
                let w: f64 = StandardNormal.sample(rng);
                level * 0.5 * w
            })
            .collect(),
        NonSpeechKind::Pink => {
            let mut b = [0.0f64; 3];
            (0..n)
                .map(|_| {
                    let w: f64 = StandardNormal.sample(rng);
                    b[0] = 0.99765 * b[0] + w * 0.0990460;
                    b[1] = 0.96300 * b[1] + w * 0.2965164;
                    b[2] = 0.57000 * b[2] + w * 1.0526913;
                    level * 0.25 * (b[0] + b[1] + b[2] + w * 0.1848)
                })
                .collect()
        }
        NonSpeechKind::Tone => {
            let f = rng.random_range(200.0..3000.0);
            let ph = rng.random_range(0.0..2.0 * PI);
            (0..n).map(|i| level * (2.0 * PI * f * i as f64 / rate + ph).sin()).collect()
        }
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Generates one clip: alternating speech / non-speech segments on the
/// 10 ms grid, plus white background noise at a random SNR.
pub fn synthesize_clip(spec: &SyntheticSpec, index: usize, rng: &mut ChaCha8Rng) -> SyntheticClip {
    let rate = CANONICAL_RATE_HZ as f64;
    let frame = FrameSpec::default();
    let hop = frame.hop_samples(CANONICAL_RATE_HZ);
    let total_frames = ((spec.clip_secs * frame.fps() as f64).round() as usize).max(1);
    let min_f = ((spec.segment_min_secs * frame.fps() as f64).round() as usize).max(1);
    let max_f = ((spec.segment_max_secs * frame.fps() as f64).round() as usize).max(min_f);
    let mut speech = rng.random_bool(0.5);
    let mut samples = Vec::with_capacity(total_frames * hop);
    let mut speech_samples = Vec::new();
    let mut segments = Vec::new();
    let mut at = 0;
    while at < total_frames {
        let mut len = rng.random_range(min_f..=max_f);
        if at == 0 && total_frames >= 2 * frame.fps() as usize {
            len = len.min(total_frames / 2);
        }
        let len = len.min(total_frames - at);
        let n = len * hop;
        let chunk = if speech {
            speech_segment(rng, spec, n, rate)
        } else {
            let kind = spec.nonspeech[rng.random_range(0..spec.nonspeech.len())];
            nonspeech_segment(rng, kind, n, rate)
        };
        if speech {
            speech_samples.extend_from_slice(&chunk);
        }
        samples.extend(chunk);
        segments.push(SpeechSegment {
            start_sec: at as f64 * frame.hop_secs(),
            end_sec: (at + len) as f64 * frame.hop_secs(),
            label: if speech { SegmentLabel::Speech } else { SegmentLabel::Nonspeech },
        });
        at += len;
        speech = !speech;
    }
    let snr = rng.random_range(spec.snr_min_db..=spec.snr_max_db);
    let reference = if speech_samples.is_empty() { 0.1 } else { rms(&speech_samples) };
    let noise_rms = reference / 10f64.powf(snr / 20.0);
    for s in samples.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *s = (*s + noise_rms * z).clamp(-1.0, 1.0);
    }
    SyntheticClip {
        clip: AudioClip::new(format!("syn{index:04}"), CANONICAL_RATE_HZ, samples),
        segments,
    }
}

/// Writes `audio/<id>.wav`, `labels/<id>.txt` and `manifest.tsv` under `out_dir`.
pub fn synthesize_corpus(spec: &SyntheticSpec, out_dir: &Path) -> Result<Manifest> {
    spec.validate()?;
    for sub in ["audio", "labels"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entries = Vec::with_capacity(spec.clips);
    for i in 0..spec.clips {
        let c = synthesize_clip(spec, i, &mut rng);
        let audio = PathBuf::from("audio").join(format!("{}.wav", c.clip.id));
        let labels = PathBuf::from("labels").join(format!("{}.txt", c.clip.id));
        write_wav(&out_dir.join(&audio), &c.clip)?;
        let lp = out_dir.join(&labels);
        std::fs::write(&lp, format_segments(&c.segments)).map_err(|e| Error::io(&lp, e))?;
        entries.push(ManifestEntry {
            id: c.clip.id,
            audio,
            labels,
            split: Split::Train,
        });
    }
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        entries,
    };
    let manifest = split_manifest(&manifest, spec.split_ratios, spec.seed)?;
    manifest.save(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}
