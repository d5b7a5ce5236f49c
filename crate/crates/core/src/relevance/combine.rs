use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `2 l g / (l + g)`, with 0 when both are 0.
pub fn harmonic<F: Scalar>(lrm: F, grg: F) -> F {
    let sum = lrm + grg;
    if sum == F::zero() {
        F::zero()
    } else {
        F::lit(2.0) * lrm * grg / sum
    }
}

/// Mean of the context score and the best reference score.
pub fn ref_qrel<F: Scalar>(context_score: F, reference_scores: &[F]) -> Result<F> {
    let best = reference_scores
        .iter()
        .copied()
        .reduce(F::max)
        .ok_or(Error::EmptyInput("reference list"))?;
    Ok(F::lit(0.5) * (context_score + best))
}
