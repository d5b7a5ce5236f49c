//! Model loading and the two forward-pass contracts the metric relies on:
//! layer-wise attentions/hidden states from a masked LM, and per-token
//! log-probabilities from a causal LM.
//!
//! A model directory holds `model.safetensors` (weights) and `config.json`
//! (architecture metadata in the usual transformer-config layout). Tokenizers
//! are standard serialized tokenizer JSON files.

mod bert;
mod gpt2;
mod ops;
mod tokenize;
mod weights;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use bert::{LayerActivations, MaskedLm};
pub use gpt2::{CausalLm, TokenLogProbs};
pub use tokenize::TokenizedPair;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    MaskedLm,
    CausalLm,
}

/// SHA-256 of the weight file, hex encoded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(pub String);

impl Fingerprint {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        Fingerprint(hex::encode(Sha256::digest(bytes)))
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Metadata of a loaded model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub model_path: PathBuf,
    pub tokenizer_path: PathBuf,
    pub kind: ModelKind,
    pub max_positions: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub hidden_dim: usize,
    pub fingerprint: Fingerprint,
}

impl ModelHandle {
    fn validate(self) -> Result<Self> {
        if self.max_positions == 0 || self.num_layers == 0 || self.num_heads == 0 {
            return Err(Error::Format {
                path: self.model_path.clone(),
                reason: "max_positions, num_layers and num_heads must be positive".into(),
            });
        }
        if !self.hidden_dim.is_multiple_of(self.num_heads) {
            return Err(Error::Format {
                path: self.model_path.clone(),
                reason: format!(
                    "hidden size {} is not divisible by {} heads",
                    self.hidden_dim, self.num_heads
                ),
            });
        }
        Ok(self)
    }
}

/// Either kind of loaded model.
pub enum LoadedModel<F> {
    Masked(MaskedLm<F>),
    Causal(CausalLm<F>),
}

impl<F: Scalar> LoadedModel<F> {
    pub fn handle(&self) -> &ModelHandle {
        match self {
            LoadedModel::Masked(m) => m.handle(),
            LoadedModel::Causal(m) => m.handle(),
        }
    }
}

/// Loads a model of the requested kind.
///
/// `model_path` may point at the weight file itself or at the directory that
/// contains `model.safetensors`; `config.json` is read from the same directory.
pub fn load_model<F: Scalar>(
    model_path: impl AsRef<Path>,
    tokenizer_path: impl AsRef<Path>,
    kind: ModelKind,
) -> Result<LoadedModel<F>> {
    Ok(match kind {
        ModelKind::MaskedLm => LoadedModel::Masked(MaskedLm::load(model_path, tokenizer_path)?),
        ModelKind::CausalLm => LoadedModel::Causal(CausalLm::load(model_path, tokenizer_path)?),
    })
}

pub(crate) struct ModelFiles {
    pub weights_path: PathBuf,
    pub weights: Vec<u8>,
    pub config: serde_json::Value,
    pub tokenizer: tokenizers::Tokenizer,
    pub tokenizer_path: PathBuf,
}

impl ModelFiles {
    pub fn read(model_path: &Path, tokenizer_path: &Path) -> Result<Self> {
        let weights_path = if model_path.is_dir() {
            model_path.join("model.safetensors")
        } else {
            model_path.to_path_buf()
        };
        let weights = std::fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
        let config_path = weights_path
            .parent()
            .map(|p| p.join("config.json"))
            .unwrap_or_else(|| PathBuf::from("config.json"));
        let config_text =
            std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        let config: serde_json::Value =
            serde_json::from_str(&config_text).map_err(|e| Error::Format {
                path: config_path.clone(),
                reason: e.to_string(),
            })?;
        if !tokenizer_path.exists() {
            return Err(Error::MissingFile(tokenizer_path.to_path_buf()));
        }
        let tokenizer = tokenizers::Tokenizer::from_file(tokenizer_path)
            .map_err(|e| Error::Tokenizer(format!("{}: {e}", tokenizer_path.display())))?;
        Ok(Self {
            weights_path,
            weights,
            config,
            tokenizer,
            tokenizer_path: tokenizer_path.to_path_buf(),
        })
    }

    pub fn usize_field(&self, keys: &[&str]) -> Result<usize> {
        keys.iter()
            .find_map(|k| self.config.get(*k).and_then(|v| v.as_u64()))
            .map(|v| v as usize)
            .ok_or_else(|| Error::Format {
                path: self.weights_path.clone(),
                reason: format!("config.json lacks {}", keys.join("/")),
            })
    }

    pub fn f64_field(&self, key: &str, default: f64) -> f64 {
        self.config.get(key).and_then(|v| v.as_f64()).unwrap_or(default)
    }

    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.config.get(key).and_then(|v| v.as_str())
    }

    pub fn bool_field(&self, key: &str) -> bool {
        self.config.get(key).and_then(|v| v.as_bool()).unwrap_or(false)
    }
}

pub(crate) fn encode_plain(tokenizer: &tokenizers::Tokenizer, text: &str) -> Result<Vec<u32>> {
    let enc = tokenizer
        .encode(text, false)
        .map_err(|e| Error::Tokenizer(e.to_string()))?;
    Ok(enc.get_ids().to_vec())
}
