//! Encoder, generators and discriminators of the adversarial detector.
//!
//! Every batched forward routine works on time-major matrices: row
//! `t * batch + b` holds step `t` of window `b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tagan_autodiff::{NodeId, ParamId, ParameterSet, Real, Tape, ValueGrid};

use crate::{Error, Result};

pub const GROUP_ENCODER: &str = "encoder";
pub const GROUP_GEN_CLS: &str = "gen_cls";
pub const GROUP_GEN_AUDIO: &str = "gen_audio";
pub const GROUP_DISC_CLS: &str = "disc_cls";
pub const GROUP_DISC_AUDIO: &str = "disc_audio";

pub const GENERATOR_GROUPS: [&str; 3] = [GROUP_ENCODER, GROUP_GEN_CLS, GROUP_GEN_AUDIO];
pub const DISCRIMINATOR_GROUPS: [&str; 2] = [GROUP_DISC_CLS, GROUP_DISC_AUDIO];

/// How predicted future frames are judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AudioDiscriminatorKind {
    /// Recurrent scorer emitting one verdict per prefix.
    Temporal,
    /// A second per-frame scorer with the same shape as the classification one.
    StaticDuplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub noise_dim: usize,
    pub disc_hidden: usize,
    /// Width of each predicted future frame; zero disables the audio generator.
    pub future_dim: usize,
    pub adversarial: bool,
    pub audio_discriminator: AudioDiscriminatorKind,
}

impl ModelConfig {
    pub fn predicts_future(&self) -> bool {
        self.future_dim > 0
    }

    /// Parameter count derived from the layer formulas alone.
    pub fn closed_form_param_count(&self) -> usize {
        let h = self.hidden;
        let gen_in = h + self.noise_dim;
        let mut n = lstm_param_count(self.input_dim, h);
        n += lstm_param_count(gen_in, h) + lstm_param_count(h, h) + dense_param_count(h, 1);
        if self.predicts_future() {
            n += lstm_param_count(gen_in, h) + lstm_param_count(h, h) + dense_param_count(h, self.future_dim);
        }
        if self.adversarial {
            n += dense_param_count(h + 1, self.disc_hidden) + dense_param_count(self.disc_hidden, 1);
            if self.predicts_future() {
                let pair = h + self.future_dim;
                n += match self.audio_discriminator {
                    AudioDiscriminatorKind::Temporal => lstm_param_count(pair, h) + dense_param_count(h, 1),
                    AudioDiscriminatorKind::StaticDuplicate => {
                        dense_param_count(pair, self.disc_hidden) + dense_param_count(self.disc_hidden, 1)
                    }
                };
            }
        }
        n
    }
}

/// `4 * (H * (I + H) + H)`.
pub fn lstm_param_count(input: usize, hidden: usize) -> usize {
    4 * (hidden * (input + hidden) + hidden)
}

pub fn dense_param_count(input: usize, output: usize) -> usize {
    input * output + output
}

fn uniform<T: Real>(rng: &mut ChaCha8Rng, shape: Vec<usize>, bound: f64) -> ValueGrid<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::from_f64(rng.random_range(-bound..=bound))).collect();
    ValueGrid::from_vec(shape, data).expect("shape matches data")
}

/// LSTM cell with gate blocks ordered input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden: usize,
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
}

impl LstmCell {
    pub fn declare<T: Real>(
        params: &mut ParameterSet<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        group: &str,
        input_dim: usize,
        hidden: usize,
    ) -> Self {
        let bound = 1.0 / ((input_dim + hidden) as f64).sqrt();
        let w_ih = params.add(format!("{name}.w_ih"), group, uniform(rng, vec![input_dim, 4 * hidden], bound));
        let w_hh = params.add(format!("{name}.w_hh"), group, uniform(rng, vec![hidden, 4 * hidden], bound));
        let mut b = vec![T::zero(); 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = T::one());
        let bias = params.add(format!("{name}.bias"), group, ValueGrid::from_vec(vec![4 * hidden], b).unwrap());
        Self {
            input_dim,
            hidden,
            w_ih,
            w_hh,
            bias,
        }
    }

    /// Runs the recurrence from a zero state; returns `h_t` (`batch x H`) per step.
    pub fn run<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        input: NodeId,
        steps: usize,
        batch: usize,
    ) -> Result<Vec<NodeId>> {
        let hd = self.hidden;
        let w_ih = tape.param(params, self.w_ih);
        let w_hh = tape.param(params, self.w_hh);
        let bias = tape.param(params, self.bias);
        let projected = tape.affine(input, w_ih, bias)?;
        let mut out = Vec::with_capacity(steps);
        let mut state: Option<(NodeId, NodeId)> = None;
        for t in 0..steps {
            let mut pre = tape.slice(projected, 0, t * batch, batch)?;
            if let Some((h, _)) = state {
                let rec = tape.matmul(h, w_hh)?;
                pre = tape.add(pre, rec)?;
            }
            let i_pre = tape.slice(pre, 1, 0, hd)?;
            let g_pre = tape.slice(pre, 1, 2 * hd, hd)?;
            let o_pre = tape.slice(pre, 1, 3 * hd, hd)?;
            let i = tape.sigmoid(i_pre);
            let g = tape.tanh(g_pre);
            let o = tape.sigmoid(o_pre);
            let ig = tape.mul(i, g)?;
            let c = match state {
                Some((_, c_prev)) => {
                    let f_pre = tape.slice(pre, 1, hd, hd)?;
                    let f = tape.sigmoid(f_pre);
                    let fc = tape.mul(f, c_prev)?;
                    tape.add(fc, ig)?
                }
                None => ig,
            };
            let tc = tape.tanh(c);
            let h = tape.mul(o, tc)?;
            out.push(h);
            state = Some((h, c));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub input_dim: usize,
    pub output_dim: usize,
    w: ParamId,
    b: ParamId,
}

impl Dense {
    pub fn declare<T: Real>(
        params: &mut ParameterSet<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        group: &str,
        input_dim: usize,
        output_dim: usize,
    ) -> Self {
        let bound = 1.0 / (input_dim as f64).sqrt();
        let w = params.add(format!("{name}.w"), group, uniform(rng, vec![input_dim, output_dim], bound));
        let b = params.add(format!("{name}.b"), group, ValueGrid::zeros(vec![output_dim]));
        Self {
            input_dim,
            output_dim,
            w,
            b,
        }
    }

    pub fn apply<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, x: NodeId) -> Result<NodeId> {
        let w = tape.param(params, self.w);
        let b = tape.param(params, self.b);
        Ok(tape.affine(x, w, b)?)
    }
}

/// Two stacked LSTM cells over `[c_t ; z]` followed by a sigmoid head.
#[derive(Debug, Clone)]
pub struct SequenceGenerator {
    cells: [LstmCell; 2],
    head: Dense,
}

impl SequenceGenerator {
    fn declare<T: Real>(
        params: &mut ParameterSet<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        input_dim: usize,
        hidden: usize,
        output_dim: usize,
    ) -> Self {
        let c1 = LstmCell::declare(params, rng, &format!("{name}.cell0"), name, input_dim, hidden);
        let c2 = LstmCell::declare(params, rng, &format!("{name}.cell1"), name, hidden, hidden);
        let head = Dense::declare(params, rng, &format!("{name}.head"), name, hidden, output_dim);
        Self { cells: [c1, c2], head }
    }

    fn forward<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        input: NodeId,
        steps: usize,
        batch: usize,
    ) -> Result<NodeId> {
        let h1 = self.cells[0].run(tape, params, input, steps, batch)?;
        let h1 = tape.concat(&h1, 0)?;
        let h2 = self.cells[1].run(tape, params, h1, steps, batch)?;
        let h2 = tape.concat(&h2, 0)?;
        let logits = self.head.apply(tape, params, h2)?;
        Ok(tape.sigmoid(logits))
    }
}

/// Per-frame scorer: one tanh hidden layer and a sigmoid output.
#[derive(Debug, Clone)]
pub struct FrameScorer {
    hidden: Dense,
    out: Dense,
}

impl FrameScorer {
    fn declare<T: Real>(
        params: &mut ParameterSet<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        input_dim: usize,
        hidden: usize,
    ) -> Self {
        Self {
            hidden: Dense::declare(params, rng, &format!("{name}.hidden"), name, input_dim, hidden),
            out: Dense::declare(params, rng, &format!("{name}.out"), name, hidden, 1),
        }
    }

    fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, pairs: NodeId) -> Result<NodeId> {
        let a = self.hidden.apply(tape, params, pairs)?;
        let a = tape.tanh(a);
        let logits = self.out.apply(tape, params, a)?;
        Ok(tape.sigmoid(logits))
    }
}

/// Recurrent scorer whose output at step `t` judges the length-`t` prefix.
#[derive(Debug, Clone)]
pub struct PrefixScorer {
    cell: LstmCell,
    head: Dense,
}

impl PrefixScorer {
    fn forward<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        pairs: NodeId,
        steps: usize,
        batch: usize,
    ) -> Result<NodeId> {
        let h = self.cell.run(tape, params, pairs, steps, batch)?;
        let h = tape.concat(&h, 0)?;
        let logits = self.head.apply(tape, params, h)?;
        Ok(tape.sigmoid(logits))
    }
}

#[derive(Debug, Clone)]
pub enum AudioDiscriminator {
    Temporal(PrefixScorer),
    StaticDuplicate(FrameScorer),
}

/// The full model: encoder, classification and audio generators, and the
/// two discriminators, all sharing one [`ParameterSet`].
#[derive(Debug, Clone)]
pub struct TaGan<T> {
    pub config: ModelConfig,
    pub params: ParameterSet<T>,
    encoder: LstmCell,
    gen_cls: SequenceGenerator,
    gen_audio: Option<SequenceGenerator>,
    disc_cls: Option<FrameScorer>,
    disc_audio: Option<AudioDiscriminator>,
}

fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch {
            expected: format!("{what} of width {expected}"),
            got: format!("width {got}"),
        });
    }
    Ok(())
}

/// Stacks equal-width rows into a grid.
pub fn rows_to_grid<T: Real>(rows: &[Vec<f64>], width: usize) -> Result<ValueGrid<T>> {
    let mut data = Vec::with_capacity(rows.len() * width);
    for r in rows {
        check_dim("row", width, r.len())?;
        data.extend(r.iter().map(|&v| T::from_f64(v)));
    }
    Ok(ValueGrid::matrix(rows.len(), width, data)?)
}

fn grid_to_rows<T: Real>(g: &ValueGrid<T>) -> Vec<Vec<f64>> {
    let (_, cols) = g.dims2().expect("matrix");
    g.data().chunks(cols).map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

/// Repeats one noise row per window across all steps (time-major).
pub fn tile_noise<T: Real>(noise: &[Vec<f64>], steps: usize) -> Result<ValueGrid<T>> {
    let width = noise.first().map_or(0, |z| z.len());
    let mut rows = Vec::with_capacity(steps * noise.len());
    for _ in 0..steps {
        rows.extend(noise.iter().cloned());
    }
    rows_to_grid(&rows, width)
}

impl<T: Real> TaGan<T> {
    /// Declares every parameter in a fixed order with seeded initial values.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let h = config.hidden;
        let gen_in = h + config.noise_dim;
        let encoder = LstmCell::declare(&mut params, &mut rng, "encoder", GROUP_ENCODER, config.input_dim, h);
        let gen_cls = SequenceGenerator::declare(&mut params, &mut rng, GROUP_GEN_CLS, gen_in, h, 1);
        let gen_audio = config.predicts_future().then(|| {
            let g = SequenceGenerator::declare(&mut params, &mut rng, GROUP_GEN_AUDIO, gen_in, h, config.future_dim);
            // Zero head: every initial future sample is 0.5.
            params.value_mut(g.head.w).fill(T::zero());
            g
        });
        let disc_cls = config
            .adversarial
            .then(|| FrameScorer::declare(&mut params, &mut rng, GROUP_DISC_CLS, h + 1, config.disc_hidden));
        let disc_audio = (config.adversarial && config.predicts_future()).then(|| {
            let pair = h + config.future_dim;
            match config.audio_discriminator {
                AudioDiscriminatorKind::Temporal => AudioDiscriminator::Temporal(PrefixScorer {
                    cell: LstmCell::declare(&mut params, &mut rng, "disc_audio.cell", GROUP_DISC_AUDIO, pair, h),
                    head: Dense::declare(&mut params, &mut rng, "disc_audio.head", GROUP_DISC_AUDIO, h, 1),
                }),
                AudioDiscriminatorKind::StaticDuplicate => AudioDiscriminator::StaticDuplicate(
                    FrameScorer::declare(&mut params, &mut rng, GROUP_DISC_AUDIO, pair, config.disc_hidden),
                ),
            }
        });
        Self {
            config,
            params,
            encoder,
            gen_cls,
            gen_audio,
            disc_cls,
            disc_audio,
        }
    }

    /// Same architecture with parameters converted to another precision.
    pub fn cast<U: Real>(&self) -> TaGan<U> {
        TaGan {
            config: self.config.clone(),
            params: self.params.cast(),
            encoder: self.encoder.clone(),
            gen_cls: self.gen_cls.clone(),
            gen_audio: self.gen_audio.clone(),
            disc_cls: self.disc_cls.clone(),
            disc_audio: self.disc_audio.clone(),
        }
    }

    pub fn count_parameters(&self) -> usize {
        self.params.count_values()
    }

    pub fn has_discriminators(&self) -> bool {
        self.disc_cls.is_some()
    }

    pub fn has_audio_generator(&self) -> bool {
        self.gen_audio.is_some()
    }

    pub fn audio_discriminator_kind(&self) -> Option<AudioDiscriminatorKind> {
        self.disc_audio.as_ref().map(|d| match d {
            AudioDiscriminator::Temporal(_) => AudioDiscriminatorKind::Temporal,
            AudioDiscriminator::StaticDuplicate(_) => AudioDiscriminatorKind::StaticDuplicate,
        })
    }

    /// `C = f^E(X)` as a `(steps*batch) x H` node.
    pub fn encode_nodes(&self, tape: &mut Tape<T>, inputs: NodeId, steps: usize, batch: usize) -> Result<NodeId> {
        check_dim("encoder input", self.config.input_dim, tape.value(inputs).dims2().map_or(0, |d| d.1))?;
        let h = self.encoder.run(tape, &self.params, inputs, steps, batch)?;
        Ok(tape.concat(&h, 0)?)
    }

    /// Per-frame speech probabilities, `(steps*batch) x 1`.
    pub fn classify_nodes(
        &self,
        tape: &mut Tape<T>,
        c: NodeId,
        noise: NodeId,
        steps: usize,
        batch: usize,
    ) -> Result<NodeId> {
        let x = tape.concat(&[c, noise], 1)?;
        self.gen_cls.forward(tape, &self.params, x, steps, batch)
    }

    /// Predicted future frames, `(steps*batch) x future_dim`.
    pub fn future_nodes(
        &self,
        tape: &mut Tape<T>,
        c: NodeId,
        noise: NodeId,
        steps: usize,
        batch: usize,
    ) -> Result<NodeId> {
        let g = self
            .gen_audio
            .as_ref()
            .ok_or_else(|| Error::Config("model has no audio generator".into()))?;
        let x = tape.concat(&[c, noise], 1)?;
        g.forward(tape, &self.params, x, steps, batch)
    }

    pub fn static_score_nodes(&self, tape: &mut Tape<T>, c: NodeId, track: NodeId) -> Result<NodeId> {
        let d = self
            .disc_cls
            .as_ref()
            .ok_or_else(|| Error::Config("model has no classification discriminator".into()))?;
        let pairs = tape.concat(&[c, track], 1)?;
        d.forward(tape, &self.params, pairs)
    }

    pub fn audio_score_nodes(
        &self,
        tape: &mut Tape<T>,
        c: NodeId,
        chunks: NodeId,
        steps: usize,
        batch: usize,
    ) -> Result<NodeId> {
        let d = self
            .disc_audio
            .as_ref()
            .ok_or_else(|| Error::Config("model has no audio discriminator".into()))?;
        check_dim("future frame", self.config.future_dim, tape.value(chunks).dims2().map_or(0, |d| d.1))?;
        let pairs = tape.concat(&[c, chunks], 1)?;
        match d {
            AudioDiscriminator::Temporal(p) => p.forward(tape, &self.params, pairs, steps, batch),
            AudioDiscriminator::StaticDuplicate(s) => s.forward(tape, &self.params, pairs),
        }
    }

    fn column<'a>(rows: &'a [Vec<f64>]) -> impl Iterator<Item = f64> + 'a {
        rows.iter().map(|r| r[0])
    }

    /// Embeddings for a single window.
    pub fn encode(&self, frames: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let x = tape.constant(rows_to_grid(frames, self.config.input_dim)?);
        let c = self.encode_nodes(&mut tape, x, frames.len(), 1)?;
        Ok(grid_to_rows(tape.value(c)))
    }

    fn window_inputs(&self, tape: &mut Tape<T>, c: &[Vec<f64>], z: &[f64]) -> Result<(NodeId, NodeId)> {
        check_dim("noise", self.config.noise_dim, z.len())?;
        let cn = tape.constant(rows_to_grid(c, self.config.hidden)?);
        let zn = tape.constant(tile_noise(&[z.to_vec()], c.len())?);
        Ok((cn, zn))
    }

    pub fn generate_classification(&self, c: &[Vec<f64>], z: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (cn, zn) = self.window_inputs(&mut tape, c, z)?;
        let y = self.classify_nodes(&mut tape, cn, zn, c.len(), 1)?;
        Ok(Self::column(&grid_to_rows(tape.value(y))).collect())
    }

    pub fn generate_future_audio(&self, c: &[Vec<f64>], z: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let (cn, zn) = self.window_inputs(&mut tape, c, z)?;
        let y = self.future_nodes(&mut tape, cn, zn, c.len(), 1)?;
        Ok(grid_to_rows(tape.value(y)))
    }

    pub fn discriminate_static(&self, c: &[Vec<f64>], track: &[f64]) -> Result<Vec<f64>> {
        if c.len() != track.len() {
            return Err(Error::LengthMismatch {
                left: c.len(),
                right: track.len(),
            });
        }
        let mut tape = Tape::new();
        let cn = tape.constant(rows_to_grid(c, self.config.hidden)?);
        let tn = tape.constant(ValueGrid::matrix(track.len(), 1, track.iter().map(|&v| T::from_f64(v)).collect())?);
        let s = self.static_score_nodes(&mut tape, cn, tn)?;
        Ok(Self::column(&grid_to_rows(tape.value(s))).collect())
    }

    /// Prefix verdicts of the audio discriminator (temporal or duplicated static).
    pub fn discriminate_temporal(&self, c: &[Vec<f64>], chunks: &[Vec<f64>]) -> Result<Vec<f64>> {
        if c.len() != chunks.len() {
            return Err(Error::LengthMismatch {
                left: c.len(),
                right: chunks.len(),
            });
        }
        let mut tape = Tape::new();
        let cn = tape.constant(rows_to_grid(c, self.config.hidden)?);
        let wn = tape.constant(rows_to_grid(chunks, self.config.future_dim)?);
        let s = self.audio_score_nodes(&mut tape, cn, wn, c.len(), 1)?;
        Ok(Self::column(&grid_to_rows(tape.value(s))).collect())
    }

    /// Batched no-gradient pass used at inference time. `inputs` is
    /// time-major `(steps*batch) x input_dim`; the noise is the zero vector.
    pub fn infer(&self, inputs: ValueGrid<T>, steps: usize, batch: usize, with_future: bool) -> Result<Inference<T>> {
        let mut tape = Tape::new();
        let x = tape.constant(inputs);
        let c = self.encode_nodes(&mut tape, x, steps, batch)?;
        let z = tape.constant(ValueGrid::zeros(vec![steps * batch, self.config.noise_dim]));
        let probs = self.classify_nodes(&mut tape, c, z, steps, batch)?;
        let future = if with_future && self.gen_audio.is_some() {
            let f = self.future_nodes(&mut tape, c, z, steps, batch)?;
            Some(tape.value(f).clone())
        } else {
            None
        };
        Ok(Inference {
            embeddings: tape.value(c).clone(),
            probabilities: tape.value(probs).clone(),
            future,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Inference<T> {
    pub embeddings: ValueGrid<T>,
    pub probabilities: ValueGrid<T>,
    pub future: Option<ValueGrid<T>>,
}
