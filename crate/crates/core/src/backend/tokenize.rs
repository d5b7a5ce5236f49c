use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate and context packed as `[CLS] candidate [SEP] context [SEP]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedPair {
    pub candidate_ids: Vec<u32>,
    pub context_ids: Vec<u32>,
    pub full_sequence: Vec<u32>,
    /// Segment id per position: 0 for the candidate segment, 1 for the context.
    pub segment_ids: Vec<u32>,
    pub candidate_positions: Vec<usize>,
    pub context_positions: Vec<usize>,
    pub special_mask: Vec<bool>,
}

impl TokenizedPair {
    pub(crate) fn pack(
        candidate_ids: Vec<u32>,
        context_ids: Vec<u32>,
        cls: u32,
        sep: u32,
        max_positions: usize,
    ) -> Result<Self> {
        if candidate_ids.is_empty() {
            return Err(Error::EmptyInput("candidate has no tokens"));
        }
        if context_ids.is_empty() {
            return Err(Error::EmptyInput("context has no tokens"));
        }
        let m = candidate_ids.len();
        let n = context_ids.len();
        let len = m + n + 3;
        if len > max_positions {
            return Err(Error::OverLength {
                len,
                max: max_positions,
            });
        }

        let mut full_sequence = Vec::with_capacity(len);
        let mut segment_ids = Vec::with_capacity(len);
        let mut special_mask = Vec::with_capacity(len);
        full_sequence.push(cls);
        full_sequence.extend_from_slice(&candidate_ids);
        full_sequence.push(sep);
        full_sequence.extend_from_slice(&context_ids);
        full_sequence.push(sep);
        segment_ids.resize(m + 2, 0);
        segment_ids.resize(len, 1);
        special_mask.push(true);
        special_mask.resize(m + 1, false);
        special_mask.push(true);
        special_mask.resize(m + 2 + n, false);
        special_mask.push(true);

        Ok(Self {
            candidate_positions: (1..=m).collect(),
            context_positions: (m + 2..m + 2 + n).collect(),
            candidate_ids,
            context_ids,
            full_sequence,
            segment_ids,
            special_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.full_sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.full_sequence.is_empty()
    }
}
