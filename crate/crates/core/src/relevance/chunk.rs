use crate::error::{Error, Result};

/// Context tokens per chunk given the total capacity and the fixed overhead
/// (candidate, separators, special tokens) that every chunk repeats.
pub fn chunk_capacity(max_positions: usize, candidate_len: usize, overhead: usize) -> Result<usize> {
    let fixed = candidate_len + overhead;
    if fixed >= max_positions {
        return Err(Error::CandidateTooLong {
            candidate: candidate_len,
            capacity: max_positions.saturating_sub(overhead),
        });
    }
    Ok(max_positions - fixed)
}

/// Splits `ids` into consecutive chunks of at most `capacity` tokens.
pub fn split_chunks(ids: &[u32], capacity: usize) -> Result<Vec<&[u32]>> {
    if ids.is_empty() {
        return Err(Error::EmptyInput("context has no tokens"));
    }
    if capacity == 0 {
        return Err(Error::InvalidConfig("chunk capacity is zero".into()));
    }
    Ok(ids.chunks(capacity).collect())
}
