//! End-to-end scoring of candidate/context pairs.
//!
//! Model outputs for a pair are reduced once into [`Evidence`]: per chunk and
//! layer, the head-max attention and cosine matrices for the masked LM, and
//! the confidence pair for the causal LM. Every variant is then scored from
//! the same evidence.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::backend::{CausalLm, MaskedLm};
use crate::error::{Error, Result};
use crate::relevance::lrm::aggregate;
use crate::relevance::{
    chunk_capacity, confidence_pair, cosine_matrix, cross_attention, gain, harmonic, power_mean,
    ref_qrel, rescale, rescale_gain, split_chunks, ConfidencePair, GainMode, GrgConfig, LrmConfig,
};
use crate::scalar::{self, Scalar};
use crate::variants::{Combine, VariantSpec, VariantTag};

/// `[CLS]`, and two `[SEP]`.
const MLM_SPECIAL_TOKENS: usize = 3;

/// Head-max attention and cosine matrices of one chunk, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LrmChunk<F> {
    pub attention: Vec<Array2<F>>,
    pub cosine: Vec<Array2<F>>,
}

impl<F: Scalar> LrmChunk<F> {
    /// Power mean of the configured layers' precisions.
    pub fn raw(&self, cfg: &LrmConfig<F>) -> Result<F> {
        let mut layer_scores = Vec::with_capacity(cfg.layers.len());
        for &l in &cfg.layers {
            if l >= self.attention.len() {
                return Err(Error::LayerOutOfRange {
                    layer: l,
                    num_layers: self.attention.len(),
                });
            }
            layer_scores.push(aggregate(&self.attention[l], &self.cosine[l], cfg.agg)?);
        }
        power_mean(&layer_scores, cfg.p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrmEvidence<F> {
    pub chunks: Vec<LrmChunk<F>>,
}

impl<F: Scalar> LrmEvidence<F> {
    pub fn chunk_raw(&self, cfg: &LrmConfig<F>) -> Result<Vec<F>> {
        self.chunks.iter().map(|c| c.raw(cfg)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrgEvidence<F> {
    pub separator: String,
    pub chunks: Vec<ConfidencePair<F>>,
}

impl<F: Scalar> GrgEvidence<F> {
    pub fn chunk_raw(&self, mode: GainMode) -> Result<Vec<F>> {
        self.chunks.iter().map(|c| gain(c, mode)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence<F> {
    pub lrm: Option<LrmEvidence<F>>,
    pub grg: Option<GrgEvidence<F>>,
}

/// Raw component values of every chunk.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChunkScores<F> {
    pub lrm_raw: Vec<F>,
    pub grg_raw: Vec<F>,
}

/// Scores of one candidate under one variant.
///
/// Components a variant does not use are `None`; `combined` is the variant's
/// final score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore<F> {
    pub lrm_raw: Option<F>,
    pub lrm: Option<F>,
    pub grg_raw: Option<F>,
    pub grg: Option<F>,
    pub combined: F,
    pub chunk_scores: ChunkScores<F>,
    pub config_tag: VariantTag,
}

fn chunk_mean<F: Scalar>(values: &[F]) -> Result<F> {
    scalar::mean(values).ok_or(Error::EmptyInput("no chunks"))
}

impl<F: Scalar> Evidence<F> {
    pub fn score(&self, spec: &VariantSpec<F>) -> Result<RelevanceScore<F>> {
        let mut chunk_scores = ChunkScores::default();
        let (mut lrm_raw, mut lrm) = (None, None);
        let (mut grg_raw, mut grg) = (None, None);
        if let Some(cfg) = &spec.lrm {
            let ev = self
                .lrm
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("variant needs masked-LM evidence".into()))?;
            chunk_scores.lrm_raw = ev.chunk_raw(cfg)?;
            let raw = chunk_mean(&chunk_scores.lrm_raw)?;
            lrm_raw = Some(raw);
            lrm = Some(rescale(raw, cfg.baseline));
        }
        if let Some(cfg) = &spec.grg {
            let ev = self
                .grg
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("variant needs causal-LM evidence".into()))?;
            if ev.separator != cfg.separator {
                return Err(Error::InvalidConfig(
                    "evidence was computed with a different separator".into(),
                ));
            }
            chunk_scores.grg_raw = ev.chunk_raw(cfg.gain_mode)?;
            let raw = chunk_mean(&chunk_scores.grg_raw)?;
            grg_raw = Some(raw);
            grg = Some(rescale_gain(raw, cfg.baseline, cfg.gain_mode));
        }
        let combined = match (spec.combine, lrm, grg) {
            (Combine::LrmOnly, Some(l), _) => l,
            (Combine::GrgOnly, _, Some(g)) => g,
            (Combine::Harmonic, Some(l), Some(g)) => harmonic(l, g),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "variant {} lacks a component its combination needs",
                    spec.tag
                )))
            }
        };
        Ok(RelevanceScore {
            lrm_raw,
            lrm,
            grg_raw,
            grg,
            combined,
            chunk_scores,
            config_tag: spec.tag,
        })
    }
}

/// Holds the loaded models; either may be absent if no requested variant needs it.
pub struct Scorer<F> {
    mlm: Option<MaskedLm<F>>,
    clm: Option<CausalLm<F>>,
}

impl<F: Scalar> Scorer<F> {
    pub fn new(mlm: Option<MaskedLm<F>>, clm: Option<CausalLm<F>>) -> Self {
        Self { mlm, clm }
    }

    pub fn mlm(&self) -> Result<&MaskedLm<F>> {
        self.mlm
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("no masked LM loaded".into()))
    }

    pub fn clm(&self) -> Result<&CausalLm<F>> {
        self.clm
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("no causal LM loaded".into()))
    }

    /// Layer count of the masked LM, used to build variant layer sets.
    pub fn num_layers(&self) -> Result<usize> {
        Ok(self.mlm()?.handle().num_layers)
    }

    /// Per-chunk attention and cosine matrices for all layers.
    pub fn lrm_evidence(&self, candidate: &str, context: &str) -> Result<LrmEvidence<F>> {
        let mlm = self.mlm()?;
        let (cand_ids, ctx_ids) = encode_both(candidate, context, |t| mlm.encode(t))?;
        let cap = chunk_capacity(mlm.handle().max_positions, cand_ids.len(), MLM_SPECIAL_TOKENS)?;
        let chunks = split_chunks(&ctx_ids, cap)?
            .into_iter()
            .map(|chunk| {
                let pair = mlm.pack_ids(cand_ids.clone(), chunk.to_vec())?;
                let acts = mlm.forward(&pair)?;
                let layers = acts.num_layers();
                let mut attention = Vec::with_capacity(layers);
                let mut cosine = Vec::with_capacity(layers);
                for l in 0..layers {
                    attention.push(cross_attention(&acts, &pair, l)?);
                    cosine.push(cosine_matrix(&acts, &pair, l)?);
                }
                Ok(LrmChunk { attention, cosine })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LrmEvidence { chunks })
    }

    /// Per-chunk confidence pairs; `separator` sits between candidate and context.
    pub fn grg_evidence(&self, candidate: &str, context: &str, separator: &str) -> Result<GrgEvidence<F>> {
        let clm = self.clm()?;
        let (cand_ids, ctx_ids) = encode_both(candidate, context, |t| clm.encode(t))?;
        let sep_ids = if separator.is_empty() {
            Vec::new()
        } else {
            clm.encode(separator)?
        };
        let cap = chunk_capacity(clm.capacity(), cand_ids.len(), sep_ids.len())?;
        let chunks = split_chunks(&ctx_ids, cap)?
            .into_iter()
            .map(|chunk| confidence_pair(clm, &cand_ids, &sep_ids, chunk))
            .collect::<Result<Vec<_>>>()?;
        Ok(GrgEvidence {
            separator: separator.to_string(),
            chunks,
        })
    }

    /// Evidence covering every component the given variants use.
    pub fn evidence(&self, candidate: &str, context: &str, specs: &[&VariantSpec<F>]) -> Result<Evidence<F>> {
        let lrm = if specs.iter().any(|s| s.lrm.is_some()) {
            Some(self.lrm_evidence(candidate, context)?)
        } else {
            None
        };
        let separators: Vec<&str> = specs
            .iter()
            .filter_map(|s| s.grg.as_ref().map(|g| g.separator.as_str()))
            .collect();
        let grg = match separators.first() {
            None => None,
            Some(sep) => {
                if separators.iter().any(|s| s != sep) {
                    return Err(Error::InvalidConfig(
                        "variants scored together must share one separator".into(),
                    ));
                }
                Some(self.grg_evidence(candidate, context, sep)?)
            }
        };
        Ok(Evidence { lrm, grg })
    }

    pub fn score(&self, candidate: &str, context: &str, spec: &VariantSpec<F>) -> Result<RelevanceScore<F>> {
        self.evidence(candidate, context, &[spec])?.score(spec)
    }

    /// Scores several variants from one set of forward passes.
    pub fn score_variants(
        &self,
        candidate: &str,
        context: &str,
        specs: &[VariantSpec<F>],
    ) -> Result<Vec<RelevanceScore<F>>> {
        let refs: Vec<&VariantSpec<F>> = specs.iter().collect();
        let ev = self.evidence(candidate, context, &refs)?;
        specs.iter().map(|s| ev.score(s)).collect()
    }

    /// `(raw, rescaled)` local relevance, chunking as needed.
    pub fn lrm_score(&self, candidate: &str, context: &str, cfg: &LrmConfig<F>) -> Result<(F, F)> {
        cfg.validate(self.num_layers()?)?;
        let raw = chunk_mean(&self.lrm_evidence(candidate, context)?.chunk_raw(cfg)?)?;
        Ok((raw, rescale(raw, cfg.baseline)))
    }

    /// `(raw, rescaled)` global relevance, chunking as needed.
    pub fn grg_score(&self, candidate: &str, context: &str, cfg: &GrgConfig<F>) -> Result<(F, F)> {
        cfg.validate()?;
        let ev = self.grg_evidence(candidate, context, &cfg.separator)?;
        let raw = chunk_mean(&ev.chunk_raw(cfg.gain_mode)?)?;
        Ok((raw, rescale_gain(raw, cfg.baseline, cfg.gain_mode)))
    }

    /// Local relevance from a single forward pass; fails instead of chunking.
    pub fn lrm_raw_unchunked(&self, candidate: &str, context: &str, cfg: &LrmConfig<F>) -> Result<F> {
        let mlm = self.mlm()?;
        let pair = mlm.tokenize_pair(candidate.trim(), context.trim())?;
        let acts = mlm.forward(&pair)?;
        let mut layer_scores = Vec::with_capacity(cfg.layers.len());
        for &l in &cfg.layers {
            let a = cross_attention(&acts, &pair, l)?;
            let c = cosine_matrix(&acts, &pair, l)?;
            layer_scores.push(aggregate(&a, &c, cfg.agg)?);
        }
        power_mean(&layer_scores, cfg.p)
    }

    /// Confidence pair from one prompted and one unprompted run; fails instead of chunking.
    pub fn confidence_pair_unchunked(
        &self,
        candidate: &str,
        context: &str,
        cfg: &GrgConfig<F>,
    ) -> Result<ConfidencePair<F>> {
        let clm = self.clm()?;
        let (cand_ids, ctx_ids) = encode_both(candidate, context, |t| clm.encode(t))?;
        let sep_ids = if cfg.separator.is_empty() {
            Vec::new()
        } else {
            clm.encode(&cfg.separator)?
        };
        confidence_pair(clm, &cand_ids, &sep_ids, &ctx_ids)
    }

    /// Mean of the context score and the best reference score, where each
    /// reference is scored in the context role with the same baselines.
    pub fn ref_qrel_score(
        &self,
        candidate: &str,
        context: &str,
        references: &[String],
        spec: &VariantSpec<F>,
    ) -> Result<F> {
        if references.is_empty() {
            return Err(Error::EmptyInput("reference list"));
        }
        let own = self.score(candidate, context, spec)?.combined;
        let refs = references
            .iter()
            .map(|r| Ok(self.score(candidate, r, spec)?.combined))
            .collect::<Result<Vec<F>>>()?;
        ref_qrel(own, &refs)
    }
}

fn encode_both(
    candidate: &str,
    context: &str,
    encode: impl Fn(&str) -> Result<Vec<u32>>,
) -> Result<(Vec<u32>, Vec<u32>)> {
    let (candidate, context) = (candidate.trim(), context.trim());
    if candidate.is_empty() {
        return Err(Error::EmptyInput("candidate"));
    }
    if context.is_empty() {
        return Err(Error::EmptyInput("context"));
    }
    let cand = encode(candidate)?;
    let ctx = encode(context)?;
    if cand.is_empty() {
        return Err(Error::EmptyInput("candidate has no tokens"));
    }
    if ctx.is_empty() {
        return Err(Error::EmptyInput("context has no tokens"));
    }
    Ok((cand, ctx))
}
