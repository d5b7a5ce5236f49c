use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::lrm::rescale;
use crate::backend::CausalLm;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// `(prompt - base) / |base|`
    Ratio,
    /// `prompt - base`
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrgConfig<F> {
    pub gain_mode: GainMode,
    pub baseline: F,
    /// Text placed between candidate and context in the prompted run.
    pub separator: String,
}

impl<F: Scalar> Default for GrgConfig<F> {
    fn default() -> Self {
        Self {
            gain_mode: GainMode::Ratio,
            baseline: F::zero(),
            separator: " ".into(),
        }
    }
}

impl<F: Scalar> GrgConfig<F> {
    pub fn with_baseline(mut self, baseline: F) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.baseline.is_finite() {
            return Err(Error::InvalidConfig("GRG baseline is not finite".into()));
        }
        if self.gain_mode == GainMode::Ratio && !(self.baseline < F::one()) {
            return Err(Error::InvalidConfig(format!(
                "GRG baseline {:?} >= 1",
                self.baseline
            )));
        }
        Ok(())
    }
}

/// Summed context log-likelihood without and with the candidate prompt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidencePair<F> {
    pub conf_base: F,
    pub conf_prompt: F,
    pub n_context_tokens: usize,
}

/// Token ids of the prompted run and where the context sits inside them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLayout {
    pub ids: Vec<u32>,
    pub context: Range<usize>,
}

impl PromptLayout {
    /// `candidate ++ separator ++ context`, each tokenized on its own.
    pub fn new(candidate_ids: &[u32], separator_ids: &[u32], context_ids: &[u32]) -> Self {
        let mut ids = Vec::with_capacity(candidate_ids.len() + separator_ids.len() + context_ids.len());
        ids.extend_from_slice(candidate_ids);
        ids.extend_from_slice(separator_ids);
        let start = ids.len();
        ids.extend_from_slice(context_ids);
        Self {
            context: start..ids.len(),
            ids,
        }
    }

    pub fn context_ids(&self) -> &[u32] {
        &self.ids[self.context.clone()]
    }
}

/// Scores the context alone and after the candidate prompt.
pub fn confidence_pair<F: Scalar>(
    clm: &CausalLm<F>,
    candidate_ids: &[u32],
    separator_ids: &[u32],
    context_ids: &[u32],
) -> Result<ConfidencePair<F>> {
    if candidate_ids.is_empty() {
        return Err(Error::EmptyInput("candidate has no tokens"));
    }
    if context_ids.is_empty() {
        return Err(Error::EmptyInput("context has no tokens"));
    }
    let layout = PromptLayout::new(candidate_ids, separator_ids, context_ids);
    debug_assert_eq!(layout.context_ids(), context_ids);
    let base = clm.clm_logprobs(context_ids)?;
    let prompted = clm.clm_logprobs(&layout.ids)?;
    Ok(ConfidencePair {
        conf_base: base.sum_range(0..context_ids.len()),
        conf_prompt: prompted.sum_range(layout.context.clone()),
        n_context_tokens: context_ids.len(),
    })
}

/// Raw confidence gain clipped at zero.
pub fn gain<F: Scalar>(pair: &ConfidencePair<F>, mode: GainMode) -> Result<F> {
    if pair.conf_base == F::zero() {
        return Err(Error::ZeroBaseConfidence);
    }
    let diff = pair.conf_prompt - pair.conf_base;
    let raw = match mode {
        GainMode::Ratio => diff / pair.conf_base.abs(),
        GainMode::Absolute => diff,
    };
    Ok(raw.max(F::zero()))
}

/// Maps a raw gain into `[0, 1]`.
///
/// Ratio gains use the linear baseline rescale. Absolute gains are unbounded
/// log-likelihood differences, so the excess over the baseline `s` is
/// squashed as `s / (1 + s)`.
pub fn rescale_gain<F: Scalar>(raw: F, baseline: F, mode: GainMode) -> F {
    match mode {
        GainMode::Ratio => rescale(raw, baseline),
        GainMode::Absolute => {
            let s = (raw - baseline).max(F::zero());
            s / (F::one() + s)
        }
    }
}

/// `(raw, rescaled)` for one confidence pair.
pub fn grg_score<F: Scalar>(pair: &ConfidencePair<F>, cfg: &GrgConfig<F>) -> Result<(F, F)> {
    let raw = gain(pair, cfg.gain_mode)?;
    Ok((raw, rescale_gain(raw, cfg.baseline, cfg.gain_mode)))
}
