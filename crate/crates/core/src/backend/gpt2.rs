//! Causal decoder forward producing per-token log-probabilities.

use std::path::Path;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::ops::{gelu_tanh_inplace, log_softmax_at, softmax_inplace, LayerNorm, Linear};
use super::weights::WeightStore;
use super::{encode_plain, Fingerprint, ModelFiles, ModelHandle, ModelKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Natural-log conditional probability of each realized token given its prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs<F> {
    pub logprobs: Vec<F>,
    pub token_ids: Vec<u32>,
}

impl<F: Scalar> TokenLogProbs<F> {
    pub fn sum_range(&self, range: std::ops::Range<usize>) -> F {
        let mut acc = F::zero();
        for &v in &self.logprobs[range] {
            acc += v;
        }
        acc
    }
}

struct DecoderBlock<F> {
    ln_1: LayerNorm<F>,
    c_attn: Linear<F>,
    c_proj: Linear<F>,
    ln_2: LayerNorm<F>,
    c_fc: Linear<F>,
    mlp_proj: Linear<F>,
}

/// A loaded causal language model (GPT-2 family) with its byte-level BPE tokenizer.
pub struct CausalLm<F> {
    handle: ModelHandle,
    tokenizer: tokenizers::Tokenizer,
    bos_token_id: Option<u32>,
    wte: Array2<F>,
    wpe: Array2<F>,
    blocks: Vec<DecoderBlock<F>>,
    ln_f: LayerNorm<F>,
}

const PREFIXES: &[&str] = &["", "transformer."];

impl<F: Scalar> CausalLm<F> {
    pub fn load(model_path: impl AsRef<Path>, tokenizer_path: impl AsRef<Path>) -> Result<Self> {
        let files = ModelFiles::read(model_path.as_ref(), tokenizer_path.as_ref())?;
        if let Some(t) = files.str_field("model_type") {
            if t != "gpt2" {
                return Err(Error::Format {
                    path: files.weights_path.clone(),
                    reason: format!("expected a gpt2 causal LM, config says {t}"),
                });
            }
        }
        if let Some(act) = files.str_field("activation_function") {
            if !matches!(act, "gelu_new" | "gelu_pytorch_tanh") {
                return Err(Error::Format {
                    path: files.weights_path.clone(),
                    reason: format!("unsupported activation {act}"),
                });
            }
        }
        let num_layers = files.usize_field(&["n_layer", "num_hidden_layers"])?;
        let num_heads = files.usize_field(&["n_head", "num_attention_heads"])?;
        let hidden = files.usize_field(&["n_embd", "hidden_size"])?;
        let max_positions = files.usize_field(&["n_positions", "max_position_embeddings"])?;
        let vocab = files.usize_field(&["vocab_size"])?;
        let inner = files.usize_field(&["n_inner"]).unwrap_or(4 * hidden);
        let eps = F::lit(files.f64_field("layer_norm_epsilon", 1e-5));

        let handle = ModelHandle {
            model_path: files.weights_path.clone(),
            tokenizer_path: files.tokenizer_path.clone(),
            kind: ModelKind::CausalLm,
            max_positions,
            num_layers,
            num_heads,
            hidden_dim: hidden,
            fingerprint: Fingerprint::of_bytes(&files.weights),
        }
        .validate()?;

        let w = WeightStore::<F>::from_bytes(&files.weights_path, &files.weights)?;
        let norm = |name: &str| -> Result<LayerNorm<F>> {
            Ok(LayerNorm {
                gamma: w.vector(PREFIXES, &format!("{name}.weight"), hidden)?,
                beta: w.vector(PREFIXES, &format!("{name}.bias"), hidden)?,
                eps,
            })
        };
        // Conv1D weights are stored as [in, out] already.
        let conv = |name: &str, in_dim: usize, out_dim: usize| -> Result<Linear<F>> {
            Ok(Linear {
                weight: w.matrix(PREFIXES, &format!("{name}.weight"), in_dim, out_dim)?,
                bias: w.vector(PREFIXES, &format!("{name}.bias"), out_dim)?,
            })
        };
        let blocks = (0..num_layers)
            .map(|i| {
                let p = format!("h.{i}");
                Ok(DecoderBlock {
                    ln_1: norm(&format!("{p}.ln_1"))?,
                    c_attn: conv(&format!("{p}.attn.c_attn"), hidden, 3 * hidden)?,
                    c_proj: conv(&format!("{p}.attn.c_proj"), hidden, hidden)?,
                    ln_2: norm(&format!("{p}.ln_2"))?,
                    c_fc: conv(&format!("{p}.mlp.c_fc"), hidden, inner)?,
                    mlp_proj: conv(&format!("{p}.mlp.c_proj"), inner, hidden)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let bos_token_id = files
            .config
            .get("bos_token_id")
            .and_then(|v| v.as_u64())
            .map(|v| v as u32)
            .filter(|&id| (id as usize) < vocab);

        Ok(Self {
            wte: w.matrix(PREFIXES, "wte.weight", vocab, hidden)?,
            wpe: w.matrix(PREFIXES, "wpe.weight", max_positions, hidden)?,
            ln_f: norm("ln_f")?,
            blocks,
            bos_token_id,
            tokenizer: files.tokenizer,
            handle,
        })
    }

    pub fn handle(&self) -> &ModelHandle {
        &self.handle
    }

    pub fn bos_token_id(&self) -> Option<u32> {
        self.bos_token_id
    }

    pub fn vocab_size(&self) -> usize {
        self.wte.nrows()
    }

    /// Number of tokens one call can score. The last token is never fed
    /// as input, so BOS does not cost a position.
    pub fn capacity(&self) -> usize {
        self.handle.max_positions
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        encode_plain(&self.tokenizer, text)
    }

    /// `[T, V]` next-token logits for the raw input `ids`.
    pub fn forward_logits(&self, ids: &[u32]) -> Result<Array2<F>> {
        let t = ids.len();
        if t > self.handle.max_positions {
            return Err(Error::OverLength {
                len: t,
                max: self.handle.max_positions,
            });
        }
        let d = self.handle.hidden_dim;
        let heads = self.handle.num_heads;
        let dh = d / heads;
        let scale = F::one() / F::from_count(dh).sqrt();

        let mut x = Array2::<F>::zeros((t, d));
        for (pos, &id) in ids.iter().enumerate() {
            let id = id as usize;
            if id >= self.vocab_size() {
                return Err(Error::Tokenizer(format!("token id {id} outside vocabulary")));
            }
            let mut row = x.row_mut(pos);
            row += &self.wte.row(id);
            row += &self.wpe.row(pos);
        }

        for block in &self.blocks {
            let mut h = x.clone();
            block.ln_1.forward_inplace(&mut h);
            let qkv = block.c_attn.forward(h.view());
            let mut ctx = Array2::<F>::zeros((t, d));
            for hd in 0..heads {
                let q = qkv.slice(s![.., hd * dh..(hd + 1) * dh]);
                let k = qkv.slice(s![.., d + hd * dh..d + (hd + 1) * dh]);
                let v = qkv.slice(s![.., 2 * d + hd * dh..2 * d + (hd + 1) * dh]);
                let mut scores = q.dot(&k.t());
                for (i, mut row) in scores.axis_iter_mut(Axis(0)).enumerate() {
                    for (j, s) in row.iter_mut().enumerate() {
                        *s = if j > i { F::neg_infinity() } else { *s * scale };
                    }
                    softmax_inplace(row);
                }
                ctx.slice_mut(s![.., hd * dh..(hd + 1) * dh]).assign(&scores.dot(&v));
            }
            x += &block.c_proj.forward(ctx.view());

            let mut h = x.clone();
            block.ln_2.forward_inplace(&mut h);
            let mut inner = block.c_fc.forward(h.view());
            gelu_tanh_inplace(&mut inner);
            x += &block.mlp_proj.forward(inner.view());
        }
        self.ln_f.forward_inplace(&mut x);
        Ok(x.dot(&self.wte.t()))
    }

    /// Log-probability of every token in `token_ids` given its prefix.
    ///
    /// The first token is conditioned on the model's BOS token. Models without
    /// one give the first token the uniform log-probability `-ln V`.
    pub fn clm_logprobs(&self, token_ids: &[u32]) -> Result<TokenLogProbs<F>> {
        if token_ids.is_empty() {
            return Err(Error::EmptyInput("token sequence"));
        }
        if token_ids.len() > self.capacity() {
            return Err(Error::OverLength {
                len: token_ids.len(),
                max: self.capacity(),
            });
        }
        let mut logprobs = Vec::with_capacity(token_ids.len());
        match self.bos_token_id {
            Some(bos) => {
                let mut input = Vec::with_capacity(token_ids.len() + 1);
                input.push(bos);
                input.extend_from_slice(token_ids);
                let logits = self.forward_logits(&input[..token_ids.len()])?;
                for (t, &id) in token_ids.iter().enumerate() {
                    logprobs.push(log_softmax_at(logits.row(t), id as usize));
                }
            }
            None => {
                logprobs.push(-F::from_count(self.vocab_size()).ln());
                if token_ids.len() > 1 {
                    let logits = self.forward_logits(&token_ids[..token_ids.len() - 1])?;
                    for (t, &id) in token_ids.iter().enumerate().skip(1) {
                        logprobs.push(log_softmax_at(logits.row(t - 1), id as usize));
                    }
                }
            }
        }
        Ok(TokenLogProbs {
            logprobs,
            token_ids: token_ids.to_vec(),
        })
    }
}
