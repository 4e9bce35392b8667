//! Run configuration files and the ablation variant table.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::{FrameSpec, Streams};
use crate::mfcc::MfccConfig;
use crate::network::{AudioDiscriminatorKind, ModelConfig};
use crate::training::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: usize,
    pub noise_dim: usize,
    pub disc_hidden: usize,
    /// Model initialisation seed; falls back to the training seed.
    pub init_seed: Option<u64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: 64,
            noise_dim: 32,
            disc_hidden: 64,
            init_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationFlags {
    pub use_gan: bool,
    pub input_streams: Vec<String>,
    pub predict_future: bool,
    pub future_target_stream: Vec<String>,
    pub use_l2: bool,
    pub temporal_discriminator: AudioDiscriminatorKind,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Variant::Proposed.flags()
    }
}

fn names(s: Streams) -> Vec<String> {
    s.names().into_iter().map(String::from).collect()
}

impl AblationFlags {
    pub fn input(&self) -> Result<Streams> {
        Streams::from_names(&self.input_streams)
    }

    pub fn target(&self) -> Result<Streams> {
        Streams::from_names(&self.future_target_stream)
    }

    /// Canonical form with stream lists in a fixed order.
    pub fn normalized(&self) -> Result<Self> {
        Ok(Self {
            input_streams: names(self.input()?),
            future_target_stream: names(self.target()?),
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub model: ModelSection,
    pub mfcc: MfccConfig,
    pub frame: FrameSpec,
    pub ablation: AblationFlags,
}

impl RunConfig {
    /// Full-size settings: 300 hidden units, 500 epochs, batches of 600.
    pub fn full_size() -> Self {
        let mut c = Self::default();
        c.model.hidden = 300;
        c.train.epochs = 500;
        c.train.batch_size = 600;
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.frame.validate()?;
        self.mfcc.validate(self.frame.frame_samples(crate::features::CANONICAL_RATE_HZ))?;
        self.ablation.input()?;
        self.ablation.target()?;
        if self.model.hidden == 0 || self.model.noise_dim == 0 || self.model.disc_hidden == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn with_variant(mut self, v: Variant) -> Self {
        self.ablation = v.flags();
        self
    }

    /// Training settings with λ zeroed when L2 is disabled.
    pub fn effective_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        if !self.ablation.use_l2 {
            t.lambda_cls = 0.0;
            t.lambda_audio = 0.0;
        }
        t
    }

    pub fn model_config(&self, raw_len: usize, n_coeffs: usize) -> Result<ModelConfig> {
        let a = &self.ablation;
        Ok(ModelConfig {
            input_dim: a.input()?.dim(raw_len, n_coeffs),
            hidden: self.model.hidden,
            noise_dim: self.model.noise_dim,
            disc_hidden: self.model.disc_hidden,
            future_dim: if a.predict_future {
                a.target()?.dim(raw_len, n_coeffs)
            } else {
                0
            },
            adversarial: a.use_gan,
            audio_discriminator: a.temporal_discriminator,
        })
    }

    pub fn init_seed(&self) -> u64 {
        self.model.init_seed.unwrap_or(self.train.seed)
    }
}

/// The thirteen ablation models plus the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Numbered(u8),
    Proposed,
}

impl Variant {
    pub fn all() -> Vec<Variant> {
        (1..=13).map(Variant::Numbered).chain([Variant::Proposed]).collect()
    }

    pub fn flags(self) -> AblationFlags {
        let s = |raw, mfcc, delta| Streams { raw, mfcc, delta };
        let all = Streams::ALL;
        let (use_gan, input, predict_future, target, use_l2, disc) = match self {
            Variant::Numbered(1) => (false, Streams::RAW, false, Streams::RAW, true, AudioDiscriminatorKind::Temporal),
            Variant::Numbered(2) => (false, all, false, Streams::RAW, true, AudioDiscriminatorKind::Temporal),
            Variant::Numbered(3) => (false, all, true, Streams::RAW, true, AudioDiscriminatorKind::Temporal),
            Variant::Numbered(4) => (true, all, false, Streams::RAW, false, AudioDiscriminatorKind::Temporal),
            Variant::Numbered(5) => (true, all, false, Streams::RAW, true, AudioDiscriminatorKind::Temporal),
            Variant::Numbered(n @ 6..=11) => {
                let st = match n {
                    6 => s(true, false, false),
                    7 => s(false, true, false),
                    8 => s(false, false, true),
                    9 => s(true, true, false),
                    10 => s(true, false, true),
                    _ => s(false, true, true),
                };
                (true, st, true, st, true, AudioDiscriminatorKind::Temporal)
            }
            Variant::Numbered(12) => (true, all, true, all, false, AudioDiscriminatorKind::Temporal),
            Variant::Numbered(13) => (true, all, true, Streams::RAW, true, AudioDiscriminatorKind::StaticDuplicate),
            Variant::Numbered(_) | Variant::Proposed => {
                (true, all, true, Streams::RAW, true, AudioDiscriminatorKind::Temporal)
            }
        };
        AblationFlags {
            use_gan,
            input_streams: names(input),
            predict_future,
            future_target_stream: names(target),
            use_l2,
            temporal_discriminator: disc,
        }
    }

    /// Inverse of [`Variant::flags`].
    pub fn from_flags(flags: &AblationFlags) -> Option<Variant> {
        let f = flags.normalized().ok()?;
        Variant::all().into_iter().find(|v| v.flags() == f)
    }

    pub fn parse_list(s: &str) -> Result<Vec<Variant>> {
        s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("proposed") {
            return Ok(Variant::Proposed);
        }
        match t.parse::<u8>() {
            Ok(n @ 1..=13) => Ok(Variant::Numbered(n)),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Numbered(n) => write!(f, "{n}"),
            Variant::Proposed => f.write_str("proposed"),
        }
    }
}
