//! Bidirectional encoder forward with attention and hidden-state capture.

use std::path::Path;

use ndarray::{s, Array2, Array3, Array4, Axis};

use super::ops::{gelu_inplace, softmax_inplace, LayerNorm, Linear};
use super::weights::WeightStore;
use super::{encode_plain, Fingerprint, ModelFiles, ModelHandle, ModelKind, TokenizedPair};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-layer attention maps and hidden states of one forward pass.
///
/// Layer `l` (0-based) is the output of the `l`-th transformer block; the
/// input embedding layer is not included.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations<F: Scalar> {
    /// `[L, H, T, T]` softmax attention weights, query-major.
    pub attentions: Array4<F>,
    /// `[L, T, D]` hidden states.
    pub embeddings: Array3<F>,
}

impl<F: Scalar> LayerActivations<F> {
    pub fn num_layers(&self) -> usize {
        self.attentions.dim().0
    }

    pub fn num_heads(&self) -> usize {
        self.attentions.dim().1
    }

    pub fn seq_len(&self) -> usize {
        self.attentions.dim().2
    }
}

struct EncoderLayer<F> {
    query: Linear<F>,
    key: Linear<F>,
    value: Linear<F>,
    attn_out: Linear<F>,
    attn_norm: LayerNorm<F>,
    intermediate: Linear<F>,
    output: Linear<F>,
    out_norm: LayerNorm<F>,
}

struct Embeddings<F> {
    word: Array2<F>,
    position: Array2<F>,
    token_type: Array2<F>,
    norm: LayerNorm<F>,
}

/// A loaded masked language model (BERT family) with its WordPiece tokenizer.
pub struct MaskedLm<F> {
    handle: ModelHandle,
    tokenizer: tokenizers::Tokenizer,
    cls_id: u32,
    sep_id: u32,
    embeddings: Embeddings<F>,
    layers: Vec<EncoderLayer<F>>,
}

const PREFIXES: &[&str] = &["", "bert."];

impl<F: Scalar> MaskedLm<F> {
    pub fn load(model_path: impl AsRef<Path>, tokenizer_path: impl AsRef<Path>) -> Result<Self> {
        let files = ModelFiles::read(model_path.as_ref(), tokenizer_path.as_ref())?;
        if let Some(t) = files.str_field("model_type") {
            if t != "bert" {
                return Err(Error::Format {
                    path: files.weights_path.clone(),
                    reason: format!("expected a bert masked LM, config says {t}"),
                });
            }
        }
        if !(files.bool_field("output_attentions") && files.bool_field("output_hidden_states")) {
            return Err(Error::MissingAttentionOutputs(files.weights_path.clone()));
        }
        let num_layers = files.usize_field(&["num_hidden_layers"])?;
        let num_heads = files.usize_field(&["num_attention_heads"])?;
        let hidden = files.usize_field(&["hidden_size"])?;
        let inter = files.usize_field(&["intermediate_size"])?;
        let max_positions = files.usize_field(&["max_position_embeddings"])?;
        let vocab = files.usize_field(&["vocab_size"])?;
        let type_vocab = files.usize_field(&["type_vocab_size"]).unwrap_or(2);
        let eps = F::lit(files.f64_field("layer_norm_eps", 1e-12));
        if let Some(act) = files.str_field("hidden_act") {
            if act != "gelu" {
                return Err(Error::Format {
                    path: files.weights_path.clone(),
                    reason: format!("unsupported activation {act}"),
                });
            }
        }

        let handle = ModelHandle {
            model_path: files.weights_path.clone(),
            tokenizer_path: files.tokenizer_path.clone(),
            kind: ModelKind::MaskedLm,
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
        let linear = |name: &str, out_dim: usize, in_dim: usize| -> Result<Linear<F>> {
            Ok(Linear {
                weight: w.linear_t(PREFIXES, &format!("{name}.weight"), out_dim, in_dim)?,
                bias: w.vector(PREFIXES, &format!("{name}.bias"), out_dim)?,
            })
        };

        let embeddings = Embeddings {
            word: w.matrix(PREFIXES, "embeddings.word_embeddings.weight", vocab, hidden)?,
            position: w.matrix(
                PREFIXES,
                "embeddings.position_embeddings.weight",
                max_positions,
                hidden,
            )?,
            token_type: w.matrix(
                PREFIXES,
                "embeddings.token_type_embeddings.weight",
                type_vocab,
                hidden,
            )?,
            norm: norm("embeddings.LayerNorm")?,
        };
        let layers = (0..num_layers)
            .map(|i| {
                let p = format!("encoder.layer.{i}");
                Ok(EncoderLayer {
                    query: linear(&format!("{p}.attention.self.query"), hidden, hidden)?,
                    key: linear(&format!("{p}.attention.self.key"), hidden, hidden)?,
                    value: linear(&format!("{p}.attention.self.value"), hidden, hidden)?,
                    attn_out: linear(&format!("{p}.attention.output.dense"), hidden, hidden)?,
                    attn_norm: norm(&format!("{p}.attention.output.LayerNorm"))?,
                    intermediate: linear(&format!("{p}.intermediate.dense"), inter, hidden)?,
                    output: linear(&format!("{p}.output.dense"), hidden, inter)?,
                    out_norm: norm(&format!("{p}.output.LayerNorm"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let special = |tok: &str| {
            files
                .tokenizer
                .token_to_id(tok)
                .ok_or_else(|| Error::Tokenizer(format!("tokenizer has no {tok} token")))
        };
        let cls_id = special("[CLS]")?;
        let sep_id = special("[SEP]")?;

        Ok(Self {
            handle,
            tokenizer: files.tokenizer,
            cls_id,
            sep_id,
            embeddings,
            layers,
        })
    }

    pub fn handle(&self) -> &ModelHandle {
        &self.handle
    }

    /// Subword ids of `text` without special tokens.
    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        encode_plain(&self.tokenizer, text)
    }

    /// Tokenizes both sides and packs them; never truncates.
    pub fn tokenize_pair(&self, candidate: &str, context: &str) -> Result<TokenizedPair> {
        if candidate.trim().is_empty() {
            return Err(Error::EmptyInput("candidate"));
        }
        if context.trim().is_empty() {
            return Err(Error::EmptyInput("context"));
        }
        self.pack_ids(self.encode(candidate)?, self.encode(context)?)
    }

    /// Packs pre-tokenized sides, checking capacity.
    pub fn pack_ids(&self, candidate_ids: Vec<u32>, context_ids: Vec<u32>) -> Result<TokenizedPair> {
        TokenizedPair::pack(
            candidate_ids,
            context_ids,
            self.cls_id,
            self.sep_id,
            self.handle.max_positions,
        )
    }

    /// Context tokens that fit next to a candidate of `candidate_len` tokens.
    pub fn context_capacity(&self, candidate_len: usize) -> usize {
        self.handle.max_positions.saturating_sub(candidate_len + 3)
    }

    /// Runs the encoder and returns every layer's attentions and hidden states.
    pub fn forward(&self, pair: &TokenizedPair) -> Result<LayerActivations<F>> {
        let t = pair.len();
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
        let vocab = self.embeddings.word.nrows();
        let types = self.embeddings.token_type.nrows();

        let mut x = Array2::<F>::zeros((t, d));
        for (pos, (&id, &seg)) in pair.full_sequence.iter().zip(&pair.segment_ids).enumerate() {
            let (id, seg) = (id as usize, seg as usize);
            if id >= vocab || seg >= types {
                return Err(Error::Tokenizer(format!("token id {id} outside vocabulary")));
            }
            let mut row = x.row_mut(pos);
            row += &self.embeddings.word.row(id);
            row += &self.embeddings.position.row(pos);
            row += &self.embeddings.token_type.row(seg);
        }
        self.embeddings.norm.forward_inplace(&mut x);

        let n_layers = self.layers.len();
        let mut attentions = Array4::<F>::zeros((n_layers, heads, t, t));
        let mut embeddings = Array3::<F>::zeros((n_layers, t, d));

        for (li, layer) in self.layers.iter().enumerate() {
            let q = layer.query.forward(x.view());
            let k = layer.key.forward(x.view());
            let v = layer.value.forward(x.view());
            let mut ctx = Array2::<F>::zeros((t, d));
            for h in 0..heads {
                let cols = s![.., h * dh..(h + 1) * dh];
                let mut scores = q.slice(cols).dot(&k.slice(cols).t());
                scores.mapv_inplace(|s| s * scale);
                for row in scores.axis_iter_mut(Axis(0)) {
                    softmax_inplace(row);
                }
                ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
                attentions.slice_mut(s![li, h, .., ..]).assign(&scores);
            }
            let mut attn = layer.attn_out.forward(ctx.view());
            attn += &x;
            layer.attn_norm.forward_inplace(&mut attn);

            let mut hidden = layer.intermediate.forward(attn.view());
            gelu_inplace(&mut hidden);
            let mut out = layer.output.forward(hidden.view());
            out += &attn;
            layer.out_norm.forward_inplace(&mut out);

            embeddings.slice_mut(s![li, .., ..]).assign(&out);
            x = out;
        }

        Ok(LayerActivations {
            attentions,
            embeddings,
        })
    }
}
