//! Adversarial objectives, Adam, and the alternating generator /
//! discriminator epoch schedule.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use tagan_autodiff::{gradient_check, GradCheckReport, NodeId, ParameterSet, Real, Tape, ValueGrid};

use crate::features::{Streams, TrainingWindow};
use crate::network::{AudioDiscriminatorKind, TaGan, DISCRIMINATOR_GROUPS, GENERATOR_GROUPS};
use crate::{Error, Result};

/// Scores are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda_cls: f64,
    pub lambda_audio: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub window: usize,
    /// Defaults to half the window.
    pub train_hop: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_cls: 30.0,
            lambda_audio: 25.0,
            learning_rate: 0.005,
            epochs: 200,
            batch_size: 32,
            seed: 7,
            window: 100,
            train_hop: None,
        }
    }
}

impl TrainConfig {
    pub fn hop(&self) -> usize {
        self.train_hop.unwrap_or((self.window / 2).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if self.lambda_cls < 0.0 || self.lambda_audio < 0.0 {
            return bad("lambdas must be nonnegative");
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.window == 0 || self.hop() == 0 {
            return bad("batch_size, window and train_hop must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Generator,
    Discriminator,
}

impl Phase {
    /// Even epochs train the encoder and generators, odd ones the discriminators.
    pub fn of_epoch(epoch: usize) -> Self {
        if epoch % 2 == 0 {
            Phase::Generator
        } else {
            Phase::Discriminator
        }
    }
}

/// Per-epoch loss components, averaged over training windows.
///
/// Generator parts include their λ-weighted L2 terms; the `*_l2` columns
/// repeat those weighted terms on their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub epoch: usize,
    pub phase: Phase,
    pub cls_gen: f64,
    pub cls_disc: f64,
    pub audio_gen: f64,
    pub audio_disc: f64,
    pub cls_l2: f64,
    pub audio_l2: f64,
    /// Cross-entropy / squared-error objective of non-adversarial variants.
    pub supervised: f64,
    pub gen_total: f64,
    pub disc_total: f64,
    pub real_mean: f64,
    pub fake_mean: f64,
}

pub const LOSS_LOG_HEADER: &str =
    "epoch\tphase\tcls_gen\tcls_disc\taudio_gen\taudio_disc\tcls_l2\taudio_l2\tsupervised\tgen_total\tdisc_total\treal_mean\tfake_mean";

impl LossReport {
    fn empty(epoch: usize) -> Self {
        Self {
            epoch,
            phase: Phase::of_epoch(epoch),
            cls_gen: 0.0,
            cls_disc: 0.0,
            audio_gen: 0.0,
            audio_disc: 0.0,
            cls_l2: 0.0,
            audio_l2: 0.0,
            supervised: 0.0,
            gen_total: 0.0,
            disc_total: 0.0,
            real_mean: 0.0,
            fake_mean: 0.0,
        }
    }

    pub fn l2_total(&self) -> f64 {
        self.cls_l2 + self.audio_l2
    }

    fn values(&self) -> [f64; 11] {
        [
            self.cls_gen,
            self.cls_disc,
            self.audio_gen,
            self.audio_disc,
            self.cls_l2,
            self.audio_l2,
            self.supervised,
            self.gen_total,
            self.disc_total,
            self.real_mean,
            self.fake_mean,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// Tab-separated row matching [`LOSS_LOG_HEADER`].
    pub fn to_row(&self) -> String {
        let phase = match self.phase {
            Phase::Generator => "G",
            Phase::Discriminator => "D",
        };
        let mut row = format!("{}\t{}", self.epoch, phase);
        for v in self.values() {
            row.push('\t');
            row.push_str(&format!("{v:.9e}"));
        }
        row
    }
}

/// Binary cross-entropy with the score clamped away from 0 and 1.
pub fn bce(score: f64, target: bool) -> f64 {
    let s = score.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    if target {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}

/// Generator and discriminator parts of one objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPair {
    pub generator: f64,
    pub discriminator: f64,
}

/// Sum of the classification and audio objectives.
pub fn combined_objective(static_part: LossPair, temporal_part: LossPair) -> LossPair {
    LossPair {
        generator: static_part.generator + temporal_part.generator,
        discriminator: static_part.discriminator + temporal_part.discriminator,
    }
}

/// `sum_i bce(scores_i, target)` on a tape.
pub fn bce_sum<T: Real>(tape: &mut Tape<T>, scores: NodeId, target: bool) -> NodeId {
    let lo = T::from_f64(BCE_CLAMP);
    let s = tape.clamp(scores, lo, T::one() - lo);
    let s = if target {
        s
    } else {
        tape.scale_shift(s, -T::one(), T::one())
    };
    let l = tape.ln(s);
    let total = tape.sum(l);
    tape.scale_shift(total, -T::one(), T::zero())
}

/// `-sum [y ln p + (1-y) ln(1-p)]` against a constant target grid.
pub fn bce_targets<T: Real>(tape: &mut Tape<T>, probs: NodeId, targets: &ValueGrid<T>) -> Result<NodeId> {
    let lo = T::from_f64(BCE_CLAMP);
    let p = tape.clamp(probs, lo, T::one() - lo);
    let q = tape.scale_shift(p, -T::one(), T::one());
    let lp = tape.ln(p);
    let lq = tape.ln(q);
    let y = tape.constant(targets.clone());
    let ny = tape.constant(targets.map(|v| T::one() - v));
    let a = tape.mul(lp, y)?;
    let b = tape.mul(lq, ny)?;
    let s = tape.add(a, b)?;
    let total = tape.sum(s);
    Ok(tape.scale_shift(total, -T::one(), T::zero()))
}

/// Nodes of the classification objective.
#[derive(Debug, Clone, Copy)]
pub struct StaticLossNodes {
    pub adversarial: NodeId,
    /// Weighted L2 term, absent when λ is zero.
    pub l2: Option<NodeId>,
    pub generator: NodeId,
    pub discriminator: NodeId,
    pub real_scores: NodeId,
    pub fake_scores: NodeId,
}

/// Classification objective. The discriminator sees `(c_t, η_t)` as real and
/// `(c_t, η̂_t)` as fake; the generator minimises `-log D(c_t, η̂_t)` plus
/// `λ Σ_t (η_t - η̂_t)²`.
pub fn static_losses<T: Real>(
    tape: &mut Tape<T>,
    model: &TaGan<T>,
    c: NodeId,
    labels: NodeId,
    predicted: NodeId,
    lambda: f64,
) -> Result<StaticLossNodes> {
    let real_scores = model.static_score_nodes(tape, c, labels)?;
    let fake_scores = model.static_score_nodes(tape, c, predicted)?;
    let d_real = bce_sum(tape, real_scores, true);
    let d_fake = bce_sum(tape, fake_scores, false);
    let discriminator = tape.add(d_real, d_fake)?;
    let adversarial = bce_sum(tape, fake_scores, true);
    let (generator, l2) = if lambda != 0.0 {
        let diff = tape.sub(labels, predicted)?;
        let sq = tape.square(diff);
        let s = tape.sum(sq);
        let l2 = tape.scale_shift(s, T::from_f64(lambda), T::zero());
        (tape.add(adversarial, l2)?, Some(l2))
    } else {
        (adversarial, None)
    };
    Ok(StaticLossNodes {
        adversarial,
        l2,
        generator,
        discriminator,
        real_scores,
        fake_scores,
    })
}

/// Weight of step `t` (zero based) when summing squared errors over every
/// prefix of a `steps`-long sequence: `steps - t`.
pub fn prefix_weight(t: usize, steps: usize) -> usize {
    steps - t
}

/// `Σ_{t=1..T} ‖w_{1:t} - ŵ_{1:t}‖²` computed literally, prefix by prefix.
pub fn prefix_l2_literal(errors: &[f64]) -> f64 {
    let mut total = 0.0;
    for t in 1..=errors.len() {
        total += errors[..t].iter().sum::<f64>();
    }
    total
}

/// Same quantity through the triangular weighting `Σ_j (T - j + 1) e_j`.
pub fn prefix_l2_weighted(errors: &[f64]) -> f64 {
    let n = errors.len();
    errors.iter().enumerate().map(|(t, e)| prefix_weight(t, n) as f64 * e).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct TemporalLossNodes {
    pub adversarial: NodeId,
    pub l2: Option<NodeId>,
    pub generator: NodeId,
    pub discriminator: NodeId,
    pub real_scores: NodeId,
    pub fake_scores: NodeId,
}

/// Audio objective over prefixes of the future window. With a temporal
/// discriminator the L2 term is summed over every prefix (triangular
/// weights); with a duplicated static discriminator it is per frame.
#[allow(clippy::too_many_arguments)]
pub fn temporal_losses<T: Real>(
    tape: &mut Tape<T>,
    model: &TaGan<T>,
    c: NodeId,
    future_true: NodeId,
    future_pred: NodeId,
    lambda: f64,
    steps: usize,
    batch: usize,
) -> Result<TemporalLossNodes> {
    let real_scores = model.audio_score_nodes(tape, c, future_true, steps, batch)?;
    let fake_scores = model.audio_score_nodes(tape, c, future_pred, steps, batch)?;
    let d_real = bce_sum(tape, real_scores, true);
    let d_fake = bce_sum(tape, fake_scores, false);
    let discriminator = tape.add(d_real, d_fake)?;
    let adversarial = bce_sum(tape, fake_scores, true);
    let (generator, l2) = if lambda != 0.0 {
        let diff = tape.sub(future_true, future_pred)?;
        let sq = tape.square(diff);
        let weighted = match model.audio_discriminator_kind() {
            Some(AudioDiscriminatorKind::StaticDuplicate) => sq,
            _ => {
                let (rows, cols) = tape.value(sq).dims2().expect("matrix");
                let mut w = Vec::with_capacity(rows * cols);
                for t in 0..steps {
                    let wt = T::from_f64(prefix_weight(t, steps) as f64);
                    w.extend(std::iter::repeat_n(wt, batch * cols));
                }
                let w = tape.constant(ValueGrid::matrix(rows, cols, w)?);
                tape.mul(sq, w)?
            }
        };
        let s = tape.sum(weighted);
        let l2 = tape.scale_shift(s, T::from_f64(lambda), T::zero());
        (tape.add(adversarial, l2)?, Some(l2))
    } else {
        (adversarial, None)
    };
    Ok(TemporalLossNodes {
        adversarial,
        l2,
        generator,
        discriminator,
        real_scores,
        fake_scores,
    })
}

/// First/second moment estimates for every parameter.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    steps: Vec<u64>,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ParameterSet<T>) -> Self {
        let zeros = |p: &tagan_autodiff::Parameter<T>| vec![T::zero(); p.value.len()];
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
            steps: vec![0; params.len()],
        }
    }

    pub fn step_count(&self, index: usize) -> u64 {
        self.steps[index]
    }
}

/// Bias-corrected Adam update of every trainable parameter from its
/// accumulated gradient. Gradients are left untouched.
pub fn adam_step<T: Real>(params: &mut ParameterSet<T>, state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if state.first.len() != params.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} parameters", state.first.len()),
            got: format!("{} parameters", params.len()),
        });
    }
    let (b1, b2) = (T::from_f64(state.beta1), T::from_f64(state.beta2));
    let eps = T::from_f64(state.eps);
    for (i, id) in params.ids().enumerate() {
        if !params.is_trainable(id) {
            continue;
        }
        if state.first[i].len() != params.value(id).len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", state.first[i].len()),
                got: format!("{} values", params.value(id).len()),
            });
        }
        state.steps[i] += 1;
        let t = state.steps[i] as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        let step = T::from_f64(lr);
        let grad = params.grad(id).data().to_vec();
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        let value = params.value_mut(id).data_mut();
        for k in 0..value.len() {
            let g = grad[k];
            m[k] = b1 * m[k] + (T::one() - b1) * g;
            v[k] = b2 * v[k] + (T::one() - b2) * g * g;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            value[k] = value[k] - step * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// A training window flattened into the streams a model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedWindow {
    pub steps: usize,
    pub inputs: Vec<f64>,
    pub future: Vec<f64>,
    pub labels: Vec<f64>,
}

impl PreparedWindow {
    pub fn new(w: &TrainingWindow, input_streams: Streams, target_streams: Streams) -> Self {
        let mut inputs = Vec::new();
        for f in &w.input.frames {
            f.extend_streams(input_streams, &mut inputs);
        }
        let mut future = Vec::new();
        for f in &w.future {
            f.extend_streams(target_streams, &mut future);
        }
        Self {
            steps: w.input.frames.len(),
            inputs,
            future,
            labels: w.labels.iter().map(|&l| l as f64).collect(),
        }
    }
}

/// Time-major batch grids ready for a tape.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub steps: usize,
    pub size: usize,
    pub inputs: ValueGrid<T>,
    pub labels: ValueGrid<T>,
    pub future: Option<ValueGrid<T>>,
    pub noise: ValueGrid<T>,
}

impl<T: Real> Batch<T> {
    /// Interleaves windows so that row `t * size + b` is step `t` of window `b`.
    pub fn assemble(windows: &[&PreparedWindow], noise: &[Vec<f64>], future_dim: usize) -> Result<Self> {
        let first = windows.first().ok_or(Error::NoData)?;
        let steps = first.steps;
        let size = windows.len();
        let in_dim = first.inputs.len() / steps;
        let z_dim = noise.first().map_or(0, |z| z.len());
        if noise.len() != size || z_dim == 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("{size} noise vectors"),
                got: format!("{}", noise.len()),
            });
        }
        let rows = steps * size;
        let mut inputs = Vec::with_capacity(rows * in_dim);
        let mut labels = Vec::with_capacity(rows);
        let mut future = Vec::with_capacity(rows * future_dim);
        let mut z = Vec::with_capacity(rows * z_dim);
        for t in 0..steps {
            for (b, w) in windows.iter().enumerate() {
                if w.steps != steps || w.inputs.len() != steps * in_dim {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{steps} steps of width {in_dim}"),
                        got: format!("{} values", w.inputs.len()),
                    });
                }
                inputs.extend(w.inputs[t * in_dim..(t + 1) * in_dim].iter().map(|&v| T::from_f64(v)));
                labels.push(T::from_f64(w.labels[t]));
                if future_dim > 0 {
                    let row = w.future.get(t * future_dim..(t + 1) * future_dim).ok_or_else(|| Error::ShapeMismatch {
                        expected: format!("future frames of width {future_dim}"),
                        got: format!("{} values", w.future.len()),
                    })?;
                    future.extend(row.iter().map(|&v| T::from_f64(v)));
                }
                z.extend(noise[b].iter().map(|&v| T::from_f64(v)));
            }
        }
        Ok(Self {
            steps,
            size,
            inputs: ValueGrid::matrix(rows, in_dim, inputs)?,
            labels: ValueGrid::matrix(rows, 1, labels)?,
            future: if future_dim > 0 {
                Some(ValueGrid::matrix(rows, future_dim, future)?)
            } else {
                None
            },
            noise: ValueGrid::matrix(rows, z_dim, z)?,
        })
    }
}

/// Settings of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphOptions {
    pub lambda_cls: f64,
    pub lambda_audio: f64,
    /// Feed the discriminators a detached copy of the embeddings so that
    /// adversarial gradients reach the encoder only through the generators.
    pub detach_condition: bool,
}

impl GraphOptions {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        Self {
            lambda_cls: cfg.lambda_cls,
            lambda_audio: cfg.lambda_audio,
            detach_condition: true,
        }
    }
}

/// All loss nodes of one batch. Totals are means over the windows of the batch.
#[derive(Debug, Clone)]
pub struct BatchGraph {
    pub embeddings: NodeId,
    pub predicted: NodeId,
    pub future: Option<NodeId>,
    pub statics: Option<StaticLossNodes>,
    pub temporal: Option<TemporalLossNodes>,
    pub supervised: Option<NodeId>,
    pub generator_total: NodeId,
    pub discriminator_total: Option<NodeId>,
}

/// Builds the full objective for a batch.
pub fn build_graph<T: Real>(
    tape: &mut Tape<T>,
    model: &TaGan<T>,
    batch: &Batch<T>,
    options: GraphOptions,
) -> Result<BatchGraph> {
    let (steps, size) = (batch.steps, batch.size);
    let x = tape.constant(batch.inputs.clone());
    let z = tape.constant(batch.noise.clone());
    let labels = tape.constant(batch.labels.clone());
    let c = model.encode_nodes(tape, x, steps, size)?;
    let predicted = model.classify_nodes(tape, c, z, steps, size)?;
    let future = if model.has_audio_generator() {
        Some(model.future_nodes(tape, c, z, steps, size)?)
    } else {
        None
    };
    let future_true = batch.future.as_ref().map(|f| tape.constant(f.clone()));
    let inv = T::from_f64(1.0 / size as f64);

    if !model.has_discriminators() {
        let mut total = bce_targets(tape, predicted, &batch.labels)?;
        if let (Some(pred), Some(truth)) = (future, future_true) {
            let diff = tape.sub(truth, pred)?;
            let sq = tape.square(diff);
            let s = tape.sum(sq);
            let mse = tape.scale_shift(s, T::from_f64(1.0 / model.config.future_dim as f64), T::zero());
            total = tape.add(total, mse)?;
        }
        let supervised = tape.scale_shift(total, inv, T::zero());
        return Ok(BatchGraph {
            embeddings: c,
            predicted,
            future,
            statics: None,
            temporal: None,
            supervised: Some(supervised),
            generator_total: supervised,
            discriminator_total: None,
        });
    }

    let cd = if options.detach_condition { tape.detach(c) } else { c };
    let statics = static_losses(tape, model, cd, labels, predicted, options.lambda_cls)?;
    let mut gen = statics.generator;
    let mut disc = statics.discriminator;
    let temporal = match (future, future_true) {
        (Some(pred), Some(truth)) => {
            let t = temporal_losses(tape, model, cd, truth, pred, options.lambda_audio, steps, size)?;
            gen = tape.add(gen, t.generator)?;
            disc = tape.add(disc, t.discriminator)?;
            Some(t)
        }
        _ => None,
    };
    let generator_total = tape.scale_shift(gen, inv, T::zero());
    let discriminator_total = tape.scale_shift(disc, inv, T::zero());
    Ok(BatchGraph {
        embeddings: c,
        predicted,
        future,
        statics: Some(statics),
        temporal,
        supervised: None,
        generator_total,
        discriminator_total: Some(discriminator_total),
    })
}

fn scalar<T: Real>(tape: &Tape<T>, node: Option<NodeId>) -> f64 {
    node.map_or(0.0, |n| tape.value(n)[0].as_f64())
}

fn score_sum<T: Real>(tape: &Tape<T>, node: NodeId) -> (f64, usize) {
    let v = tape.value(node);
    (v.data().iter().map(|x| x.as_f64()).sum(), v.len())
}

#[derive(Default)]
struct Accumulator {
    report: Option<LossReport>,
    windows: usize,
    real: (f64, usize),
    fake: (f64, usize),
}

impl Accumulator {
    fn add<T: Real>(&mut self, epoch: usize, tape: &Tape<T>, g: &BatchGraph, size: usize) {
        let r = self.report.get_or_insert_with(|| LossReport::empty(epoch));
        let n = size as f64;
        if let Some(s) = &g.statics {
            r.cls_gen += scalar(tape, Some(s.generator));
            r.cls_disc += scalar(tape, Some(s.discriminator));
            r.cls_l2 += scalar(tape, s.l2);
            for (acc, node) in [(&mut self.real, s.real_scores), (&mut self.fake, s.fake_scores)] {
                let (sum, cnt) = score_sum(tape, node);
                acc.0 += sum;
                acc.1 += cnt;
            }
        }
        if let Some(t) = &g.temporal {
            r.audio_gen += scalar(tape, Some(t.generator));
            r.audio_disc += scalar(tape, Some(t.discriminator));
            r.audio_l2 += scalar(tape, t.l2);
            for (acc, node) in [(&mut self.real, t.real_scores), (&mut self.fake, t.fake_scores)] {
                let (sum, cnt) = score_sum(tape, node);
                acc.0 += sum;
                acc.1 += cnt;
            }
        }
        r.supervised += scalar(tape, g.supervised) * n;
        self.windows += size;
    }

    fn finish(self, epoch: usize) -> LossReport {
        let mut r = self.report.unwrap_or_else(|| LossReport::empty(epoch));
        let n = self.windows.max(1) as f64;
        for v in [
            &mut r.cls_gen,
            &mut r.cls_disc,
            &mut r.audio_gen,
            &mut r.audio_disc,
            &mut r.cls_l2,
            &mut r.audio_l2,
            &mut r.supervised,
        ] {
            *v /= n;
        }
        r.gen_total = r.cls_gen + r.audio_gen + r.supervised;
        r.disc_total = r.cls_disc + r.audio_disc;
        r.real_mean = if self.real.1 > 0 { self.real.0 / self.real.1 as f64 } else { 0.0 };
        r.fake_mean = if self.fake.1 > 0 { self.fake.0 / self.fake.1 as f64 } else { 0.0 };
        r
    }
}

/// Deterministic random streams of one training run.
pub struct RunStreams {
    pub shuffle: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        let mut shuffle = ChaCha8Rng::seed_from_u64(seed);
        shuffle.set_stream(1);
        let mut noise = ChaCha8Rng::seed_from_u64(seed);
        noise.set_stream(2);
        Self { shuffle, noise }
    }

    pub fn draw_noise(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| StandardNormal.sample(&mut self.noise)).collect()
    }
}

/// Runs one epoch in the given phase and returns its report.
pub fn run_epoch<T: Real>(
    model: &mut TaGan<T>,
    adam: &mut AdamState<T>,
    windows: &[PreparedWindow],
    cfg: &TrainConfig,
    epoch: usize,
    streams: &mut RunStreams,
) -> Result<LossReport> {
    let phase = Phase::of_epoch(epoch);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.shuffle(&mut streams.shuffle);
    if phase == Phase::Discriminator && !model.has_discriminators() {
        return Ok(LossReport::empty(epoch));
    }
    match phase {
        Phase::Generator => model.params.set_trainable_groups(&GENERATOR_GROUPS),
        Phase::Discriminator => model.params.set_trainable_groups(&DISCRIMINATOR_GROUPS),
    }
    let options = GraphOptions::from_config(cfg);
    let mut acc = Accumulator::default();
    for chunk in order.chunks(cfg.batch_size) {
        let picked: Vec<&PreparedWindow> = chunk.iter().map(|&i| &windows[i]).collect();
        let noise: Vec<Vec<f64>> = picked.iter().map(|_| streams.draw_noise(model.config.noise_dim)).collect();
        let batch = Batch::<T>::assemble(&picked, &noise, model.config.future_dim)?;
        let mut tape = Tape::new();
        let graph = build_graph(&mut tape, model, &batch, options)?;
        let root = match phase {
            Phase::Generator => graph.generator_total,
            Phase::Discriminator => graph.discriminator_total.expect("discriminators present"),
        };
        if !tape.value(root)[0].as_f64().is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        model.params.zero_grads();
        tape.backward(root, &mut model.params)?;
        adam_step(&mut model.params, adam, cfg.learning_rate)?;
        acc.add(epoch, &tape, &graph, batch.size);
    }
    model.params.zero_grads();
    model.params.set_all_trainable(true);
    let report = acc.finish(epoch);
    if !report.is_finite() {
        return Err(Error::NonFiniteLoss { epoch });
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct FitOutcome<T> {
    pub model: TaGan<T>,
    pub reports: Vec<LossReport>,
}

/// Alternating adversarial training. `on_epoch` sees each report as soon
/// as its epoch completes.
pub fn fit<T: Real>(
    mut model: TaGan<T>,
    windows: &[PreparedWindow],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&LossReport),
) -> Result<FitOutcome<T>> {
    cfg.validate()?;
    if windows.is_empty() {
        return Err(Error::NoData);
    }
    let mut adam = AdamState::new(&model.params);
    let mut streams = RunStreams::new(cfg.seed);
    let mut reports = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let r = run_epoch(&mut model, &mut adam, windows, cfg, epoch, &mut streams)?;
        on_epoch(&r);
        reports.push(r);
    }
    Ok(FitOutcome { model, reports })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Generator,
    Discriminator,
}

/// Finite-difference check of one batch objective with respect to the
/// parameters in `groups`. The noise is whatever `batch` holds.
#[allow(clippy::too_many_arguments)]
pub fn objective_gradient_check(
    model: &TaGan<f64>,
    batch: &Batch<f64>,
    options: GraphOptions,
    groups: &[&str],
    objective: Objective,
    probes: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let probe = build_graph(&mut Tape::new(), model, batch, options)?;
    if objective == Objective::Discriminator && probe.discriminator_total.is_none() {
        return Err(Error::Config("model has no discriminators".into()));
    }
    let mut params = model.params.clone();
    params.set_trainable_groups(groups);
    let mut shell = model.clone();
    let report = gradient_check(&mut params, probes, h, seed, |tape, ps| {
        shell.params = ps.clone();
        let g = build_graph(tape, &shell, batch, options).expect("graph was built once with these shapes");
        Ok(match objective {
            Objective::Generator => g.generator_total,
            Objective::Discriminator => g.discriminator_total.expect("adversarial model"),
        })
    })?;
    Ok(report)
}
