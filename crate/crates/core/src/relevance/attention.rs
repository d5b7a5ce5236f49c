use ndarray::{s, Array2};

use crate::backend::{LayerActivations, TokenizedPair};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_layer<F: Scalar>(acts: &LayerActivations<F>, layer: usize) -> Result<()> {
    if layer >= acts.num_layers() {
        return Err(Error::LayerOutOfRange {
            layer,
            num_layers: acts.num_layers(),
        });
    }
    Ok(())
}

/// Head-max candidate-to-context attention `a_mn` at `layer` (0-based).
///
/// Each head's candidate rows are restricted to context keys and renormalized
/// to sum to one before the element-wise maximum over heads.
pub fn cross_attention<F: Scalar>(
    acts: &LayerActivations<F>,
    pair: &TokenizedPair,
    layer: usize,
) -> Result<Array2<F>> {
    check_layer(acts, layer)?;
    let m = pair.candidate_positions.len();
    let n = pair.context_positions.len();
    let mut out = Array2::<F>::zeros((m, n));
    let per_layer = acts.attentions.slice(s![layer, .., .., ..]);
    for head in per_layer.outer_iter() {
        for (mi, &q) in pair.candidate_positions.iter().enumerate() {
            let row = head.row(q);
            let mut total = F::zero();
            for &k in &pair.context_positions {
                total += row[k];
            }
            for (ni, &k) in pair.context_positions.iter().enumerate() {
                let w = if total > F::zero() {
                    row[k] / total
                } else {
                    F::one() / F::from_count(n)
                };
                if w > out[[mi, ni]] {
                    out[[mi, ni]] = w;
                }
            }
        }
    }
    Ok(out)
}

/// Cosine similarity between candidate and context hidden states at `layer`.
///
/// A zero-norm vector yields cosine 0 and a warning.
pub fn cosine_matrix<F: Scalar>(
    acts: &LayerActivations<F>,
    pair: &TokenizedPair,
    layer: usize,
) -> Result<Array2<F>> {
    check_layer(acts, layer)?;
    let emb = acts.embeddings.slice(s![layer, .., ..]);
    let gather = |positions: &[usize]| {
        let mut rows = Array2::<F>::zeros((positions.len(), emb.ncols()));
        let mut zero = false;
        for (i, &p) in positions.iter().enumerate() {
            let v = emb.row(p);
            let norm = v.dot(&v).sqrt();
            if norm > F::zero() {
                rows.row_mut(i).assign(&v.mapv(|x| x / norm));
            } else {
                zero = true;
            }
        }
        (rows, zero)
    };
    let (cand, zc) = gather(&pair.candidate_positions);
    let (ctx, zx) = gather(&pair.context_positions);
    if zc || zx {
        log::warn!("zero-norm hidden state at layer {layer}; cosine treated as 0");
    }
    Ok(cand.dot(&ctx.t()))
}
