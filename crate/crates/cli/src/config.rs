//! Options shared by every subcommand, merged as flags > config file > defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Common {
    /// Masked LM weights (`model.safetensors` or its directory).
    #[arg(long, global = true)]
    pub mlm_model: Option<PathBuf>,
    /// Causal LM weights (`model.safetensors` or its directory).
    #[arg(long, global = true)]
    pub clm_model: Option<PathBuf>,
    /// Masked LM tokenizer JSON [default: tokenizer.json next to the model].
    #[arg(long, global = true)]
    pub tokenizer_mlm: Option<PathBuf>,
    /// Causal LM tokenizer JSON [default: tokenizer.json next to the model].
    #[arg(long, global = true)]
    pub tokenizer_clm: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Dataset format: jsonl, squad_json or adversarial [default: jsonl].
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Predictions to merge into the dataset by id.
    #[arg(long, global = true)]
    pub predictions: Option<PathBuf>,
    /// Use the first reference question where no candidate is given.
    #[arg(long, global = true)]
    pub candidate_from_reference: Option<bool>,
    #[arg(long, global = true)]
    pub baseline_file: Option<PathBuf>,
    /// Variant tag (M1..M9, full) [default: full]; `baseline` also takes a
    /// comma list or `all` [default there: all].
    #[arg(long, global = true)]
    pub variant: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file (or directory for `analyze`) [default: stdout].
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Accept a baseline file estimated with different model files.
    #[arg(long, global = true)]
    pub allow_fingerprint_mismatch: Option<bool>,
    /// Scalar precision: f32 or f64 [default: f32].
    #[arg(long, global = true)]
    pub precision: Option<String>,
}

macro_rules! or_fields {
    ($a:expr, $b:expr, $($f:ident),*) => {
        Common { $($f: $a.$f.or($b.$f),)* }
    };
}

impl Common {
    /// Fields set in `self` win over `fallback`.
    pub fn or(self, fallback: Common) -> Common {
        or_fields!(
            self,
            fallback,
            mlm_model,
            clm_model,
            tokenizer_mlm,
            tokenizer_clm,
            dataset,
            format,
            predictions,
            candidate_from_reference,
            baseline_file,
            variant,
            seed,
            workers,
            output,
            allow_fingerprint_mismatch,
            precision
        )
    }

    pub fn defaults() -> Common {
        Common {
            format: Some("jsonl".into()),
            candidate_from_reference: Some(false),
            seed: Some(0),
            allow_fingerprint_mismatch: Some(false),
            precision: Some("f32".into()),
            ..Default::default()
        }
    }

    pub fn from_toml(path: &Path) -> Result<Common> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn tokenizer_for(model: &Path, explicit: Option<&PathBuf>) -> PathBuf {
        if let Some(t) = explicit {
            return t.clone();
        }
        let dir = if model.is_dir() {
            model
        } else {
            model.parent().unwrap_or(Path::new("."))
        };
        dir.join("tokenizer.json")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn variant(&self) -> &str {
        self.variant.as_deref().unwrap_or("full")
    }

    pub fn flag(v: Option<bool>) -> bool {
        v.unwrap_or(false)
    }
}
