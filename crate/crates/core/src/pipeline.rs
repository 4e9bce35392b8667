//! End-to-end operations shared by the command line and the tests:
//! dataset loading, training runs, utterance prediction, evaluation,
//! ablation sweeps and throughput measurement.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tagan_autodiff::ValueGrid;

use crate::checkpoint::Checkpoint;
use crate::config::{RunConfig, Variant};
use crate::corpus::{frame_labels, load_segments, load_wav, synthesize_clip, Manifest, Split, SyntheticSpec};
use crate::features::{
    apply_normalization, build_training_windows, fit_normalization, AudioClip, FeatureExtractor, FeatureFrame,
    Streams,
};
use crate::metrics::{detection_cost, MetricsReport, PredictionTrack};
use crate::network::TaGan;
use crate::training::{fit, LossReport, PreparedWindow};
use crate::{Error, Result};

/// A clip with its reference labels and unnormalised features.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub clip: AudioClip,
    pub labels: Vec<u8>,
    pub features: Vec<FeatureFrame>,
}

impl Utterance {
    pub fn new(clip: AudioClip, segments: &[crate::metrics::SpeechSegment], extractor: &FeatureExtractor) -> Result<Self> {
        let features = extractor.extract(&clip)?;
        let labels = frame_labels(segments, features.len(), extractor.frame_spec());
        Ok(Self {
            id: clip.id.clone(),
            clip,
            labels,
            features,
        })
    }
}

/// Every split of a manifest, loaded once.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<Utterance>,
    pub val: Vec<Utterance>,
    pub test: Vec<Utterance>,
}

impl Dataset {
    pub fn load(manifest: &Manifest, extractor: &FeatureExtractor) -> Result<Self> {
        let mut d = Dataset::default();
        for e in &manifest.entries {
            let mut clip = load_wav(&manifest.audio_path(e))?;
            clip.id = e.id.clone();
            let segments = load_segments(&manifest.labels_path(e))?;
            let u = Utterance::new(clip, &segments, extractor)?;
            match e.split {
                Split::Train => d.train.push(u),
                Split::Val => d.val.push(u),
                Split::Test => d.test.push(u),
            }
        }
        Ok(d)
    }

    pub fn split(&self, split: Split) -> &[Utterance] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

pub fn extractor_for(config: &RunConfig) -> Result<FeatureExtractor> {
    FeatureExtractor::new(config.frame, config.mfcc.clone())
}

/// Normalisation statistics and flattened training windows for a run.
pub fn prepare_training(
    config: &RunConfig,
    train: &[Utterance],
) -> Result<(crate::features::NormalizationStats, Vec<PreparedWindow>)> {
    if train.is_empty() {
        return Err(Error::NoData);
    }
    let stats = fit_normalization(&train.iter().map(|u| u.features.as_slice()).collect::<Vec<_>>())?;
    let input = config.ablation.input()?;
    let target = config.ablation.target()?;
    let mut windows = Vec::new();
    for u in train {
        let frames = apply_normalization(&u.features, &stats);
        match build_training_windows(&frames, &u.labels, config.train.window, config.train.hop()) {
            Ok(ws) => windows.extend(ws.iter().map(|w| PreparedWindow::new(w, input, target))),
            Err(Error::TooShort { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    if windows.is_empty() {
        return Err(Error::NoData);
    }
    Ok((stats, windows))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub reports: Vec<LossReport>,
}

/// Trains a model on the training split of `data` as described by `config`.
pub fn train(config: &RunConfig, data: &Dataset, on_epoch: impl FnMut(&LossReport)) -> Result<TrainOutcome> {
    config.validate()?;
    let extractor = extractor_for(config)?;
    let (stats, windows) = prepare_training(config, &data.train)?;
    let model_cfg = config.model_config(extractor.raw_len(), extractor.n_coeffs())?;
    let model = TaGan::<f32>::new(model_cfg, config.init_seed());
    let out = fit(model, &windows, &config.effective_train(), on_epoch)?;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: config.clone(),
            normalization: stats,
            model: out.model,
        },
        reports: out.reports,
    })
}

/// Runs a checkpoint over whole utterances.
#[derive(Debug, Clone)]
pub struct Detector {
    pub checkpoint: Checkpoint,
    extractor: FeatureExtractor,
    input: Streams,
}

/// Probabilities and embeddings for every frame of one utterance.
#[derive(Debug, Clone)]
pub struct UtteranceOutput {
    pub track: PredictionTrack,
    pub embeddings: Vec<Vec<f64>>,
}

impl Detector {
    pub fn new(checkpoint: Checkpoint) -> Result<Self> {
        let extractor = extractor_for(&checkpoint.config)?;
        let input = checkpoint.config.ablation.input()?;
        Ok(Self {
            checkpoint,
            extractor,
            input,
        })
    }

    pub fn window(&self) -> usize {
        self.checkpoint.config.train.window
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// Non-overlapping windows at `0, T, 2T, ...`; the last one is zero padded
    /// and its outputs are cut back to the true frame count.
    pub fn run_features(&self, features: &[FeatureFrame]) -> Result<UtteranceOutput> {
        if features.is_empty() {
            return Err(Error::EmptySignal);
        }
        let frames = apply_normalization(features, &self.checkpoint.normalization);
        let t = self.window();
        let n = frames.len();
        let batch = n.div_ceil(t);
        let dim = self.input.dim(self.extractor.raw_len(), self.extractor.n_coeffs());
        let mut data = vec![0f32; t * batch * dim];
        let mut row = Vec::with_capacity(dim);
        for (i, f) in frames.iter().enumerate() {
            let (b, step) = (i / t, i % t);
            row.clear();
            f.extend_streams(self.input, &mut row);
            let at = (step * batch + b) * dim;
            for (d, v) in data[at..at + dim].iter_mut().zip(&row) {
                *d = *v as f32;
            }
        }
        let grid = ValueGrid::matrix(t * batch, dim, data)?;
        let out = self.checkpoint.model.infer(grid, t, batch, false)?;
        let h = self.checkpoint.model.config.hidden;
        let emb = out.embeddings.data();
        let probs = out.probabilities.data();
        let mut p = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n);
        for i in 0..n {
            let r = (i % t) * batch + i / t;
            p.push(probs[r] as f64);
            e.push(emb[r * h..(r + 1) * h].iter().map(|&v| v as f64).collect());
        }
        Ok(UtteranceOutput {
            track: PredictionTrack::new(p),
            embeddings: e,
        })
    }

    pub fn run(&self, clip: &AudioClip) -> Result<UtteranceOutput> {
        if clip.samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        self.run_features(&self.extractor.extract(clip)?)
    }
}

pub fn predict_utterance(clip: &AudioClip, detector: &Detector) -> Result<PredictionTrack> {
    Ok(detector.run(clip)?.track)
}

/// One line per frame: the embedding followed by the reference label.
pub fn dump_embeddings(clip: &AudioClip, detector: &Detector, labels: Option<&[u8]>) -> Result<String> {
    let out = detector.run(clip)?;
    if let Some(l) = labels {
        if l.len() != out.embeddings.len() {
            return Err(Error::LengthMismatch {
                left: out.embeddings.len(),
                right: l.len(),
            });
        }
    }
    let mut s = String::new();
    for (i, row) in out.embeddings.iter().enumerate() {
        for v in row {
            let _ = write!(s, "{v:e}\t");
        }
        match labels {
            Some(l) => {
                let _ = writeln!(s, "{}", l[i]);
            }
            None => s.push_str("-\n"),
        }
    }
    Ok(s)
}

/// Source of frame decisions during evaluation.
pub enum Predictor<'a> {
    Model(&'a Detector),
    /// Returns the reference labels.
    Oracle,
    AllSpeech,
}

impl Predictor<'_> {
    pub fn labels(&self, u: &Utterance) -> Result<Vec<u8>> {
        match self {
            Predictor::Model(d) => Ok(d.run_features(&u.features)?.track.labels()),
            Predictor::Oracle => Ok(u.labels.clone()),
            Predictor::AllSpeech => Ok(vec![1; u.labels.len()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub id: String,
    pub frames: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Pooled over every frame of every utterance.
    pub overall: MetricsReport,
    pub utterances: Vec<UtteranceScore>,
}

pub fn evaluate(predictor: &Predictor<'_>, utterances: &[Utterance]) -> Result<Evaluation> {
    if utterances.is_empty() {
        return Err(Error::NoData);
    }
    let mut all_pred = Vec::new();
    let mut all_ref = Vec::new();
    let mut scores = Vec::with_capacity(utterances.len());
    for u in utterances {
        let p = predictor.labels(u)?;
        if p.len() != u.labels.len() {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: u.labels.len(),
            });
        }
        scores.push(UtteranceScore {
            id: u.id.clone(),
            frames: p.len(),
            errors: p.iter().zip(&u.labels).filter(|(a, b)| a != b).count(),
        });
        all_pred.extend(p);
        all_ref.extend_from_slice(&u.labels);
    }
    Ok(Evaluation {
        overall: detection_cost(&all_pred, &all_ref)?,
        utterances: scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub variant: String,
    pub seed: u64,
    pub window: usize,
    pub fer: f64,
    pub dcf: f64,
    pub runtime_secs: f64,
}

pub const ABLATION_HEADER: &str = "variant\tseed\twindow\tfer\tdcf\truntime_secs";

impl AblationResult {
    pub fn to_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.3}",
            self.variant, self.seed, self.window, self.fer, self.dcf, self.runtime_secs
        )
    }
}

/// Trains and scores one variant / seed / window combination on the test split.
pub fn run_variant(base: &RunConfig, data: &Dataset, variant: Variant, seed: u64, window: usize) -> Result<AblationResult> {
    let mut cfg = base.clone().with_variant(variant);
    cfg.train.seed = seed;
    cfg.train.window = window;
    if base.train.train_hop.is_some_and(|h| h > window) {
        cfg.train.train_hop = None;
    }
    let started = Instant::now();
    let out = train(&cfg, data, |_| {})?;
    let detector = Detector::new(out.checkpoint)?;
    let eval = evaluate(&Predictor::Model(&detector), &data.test)?;
    Ok(AblationResult {
        variant: variant.to_string(),
        seed,
        window,
        fer: eval.overall.fer,
        dcf: eval.overall.dcf,
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

/// Every variant for every seed and window, sorted by variant, window, seed.
pub fn ablate(
    base: &RunConfig,
    data: &Dataset,
    variants: &[Variant],
    seeds: &[u64],
    windows: &[usize],
    mut on_result: impl FnMut(&AblationResult),
) -> Result<Vec<AblationResult>> {
    let mut keyed = Vec::new();
    for &v in variants {
        for &w in windows {
            for &s in seeds {
                let r = run_variant(base, data, v, s, w)?;
                on_result(&r);
                keyed.push(((v, w, s), r));
            }
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seconds: f64,
    pub elapsed_secs: f64,
    pub real_time_factor: f64,
    pub parameters: usize,
    pub closed_form_parameters: usize,
}

/// Times prediction over `seconds` of seeded synthetic audio.
pub fn bench(detector: &Detector, seconds: f64, seed: u64) -> Result<BenchReport> {
    let spec = SyntheticSpec {
        clip_secs: seconds,
        seed,
        ..SyntheticSpec::default()
    };
    let clip = synthesize_clip(&spec, 0, &mut ChaCha8Rng::seed_from_u64(seed)).clip;
    let started = Instant::now();
    let track = predict_utterance(&clip, detector)?;
    let elapsed = started.elapsed().as_secs_f64().max(1e-9);
    debug_assert!(!track.is_empty());
    let model = &detector.checkpoint.model;
    Ok(BenchReport {
        seconds: clip.duration_secs(),
        elapsed_secs: elapsed,
        real_time_factor: clip.duration_secs() / elapsed,
        parameters: model.count_parameters(),
        closed_form_parameters: model.config.closed_form_param_count(),
    })
}
