//! Binary model files: `TAGN` magic, version, TOML header, f32 parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tagan_autodiff::ValueGrid;

use crate::config::RunConfig;
use crate::features::NormalizationStats;
use crate::network::{ModelConfig, TaGan};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TAGN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    normalization: NormalizationStats,
    config: RunConfig,
    params: Vec<ParamEntry>,
}

/// A trained model with everything needed to run it on new audio.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub normalization: NormalizationStats,
    pub model: TaGan<f32>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            model: self.model.config.clone(),
            normalization: self.normalization.clone(),
            config: self.config.clone(),
            params: self
                .model
                .params
                .iter()
                .map(|p| ParamEntry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                })
                .collect(),
        };
        let text = toml::to_string(&header).expect("header serialises");
        let mut out = Vec::with_capacity(12 + text.len() + 4 * self.model.params.count_values());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        for p in self.model.params.iter() {
            for v in p.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing TAGN magic".into()));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let len = word(8) as usize;
        let body = bytes.get(12..12 + len).ok_or_else(|| bad("truncated header".into()))?;
        let text = std::str::from_utf8(body).map_err(|e| bad(e.to_string()))?;
        let header: Header = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let mut model = TaGan::<f32>::new(header.model.clone(), 0);
        let declared: Vec<ParamEntry> = model
            .params
            .iter()
            .map(|p| ParamEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect();
        if declared != header.params {
            return Err(bad("parameter list does not match the model dimensions".into()));
        }
        let mut at = 12 + len;
        let expected = at + 4 * model.params.count_values();
        if bytes.len() != expected {
            return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        for id in model.params.ids().collect::<Vec<_>>() {
            let shape = model.params.value(id).shape().to_vec();
            let n = model.params.value(id).len();
            let data = bytes[at..at + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            *model.params.value_mut(id) = ValueGrid::from_vec(shape, data)?;
            at += 4 * n;
        }
        Ok(Self {
            config: header.config,
            normalization: header.normalization,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut config = RunConfig::default();
        config.model.hidden = 4;
        let model = TaGan::<f32>::new(config.model_config(80, 13).unwrap(), 3);
        let stats = NormalizationStats {
            mfcc_min: vec![-1.5; 13],
            mfcc_max: vec![2.25; 13],
            delta_min: vec![-0.1; 13],
            delta_max: vec![0.1; 13],
        };
        Checkpoint {
            config,
            normalization: stats,
            model,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], b"TAGN");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.config, c.config);
        assert_eq!(back.normalization, c.normalization);
        for (a, b) in back.model.params.iter().zip(c.model.params.iter()) {
            assert_eq!(a.value, b.value);
        }
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"NOPE").is_err());
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(Checkpoint::from_bytes(&v).is_err());
    }
}
