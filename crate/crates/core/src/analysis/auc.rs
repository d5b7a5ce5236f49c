use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mann-Whitney statistic kept in integers: `AUC = twice_u / (2 * n_pos * n_neg)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AucStatistic {
    pub twice_u: u64,
    pub n_pos: u64,
    pub n_neg: u64,
}

impl AucStatistic {
    pub fn value<F: Scalar>(&self) -> F {
        F::lit(self.twice_u as f64) / F::lit((2 * self.n_pos * self.n_neg) as f64)
    }
}

/// Counts positive-over-negative wins, ties as one half. `labels[i]` is true for positives.
pub fn auc_statistic<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<AucStatistic> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidConfig(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Undefined("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("AUC needs both positive and negative labels".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));
    let (mut twice_u, mut neg_below) = (0u64, 0u64);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let pos = idx[i..=j].iter().filter(|&&k| labels[k]).count() as u64;
        let neg = (j + 1 - i) as u64 - pos;
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j + 1;
    }
    Ok(AucStatistic { twice_u, n_pos, n_neg })
}

pub fn roc_auc<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<F> {
    Ok(auc_statistic(scores, labels)?.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_and_swap() {
        let l = [true, true, false, false];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.4, 0.3], &l).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.4, 0.3], &[true, false, true, false]).unwrap(), 0.75);
    }

    #[test]
    fn ties_count_half() {
        assert_eq!(roc_auc(&[0.5f64, 0.5], &[true, false]).unwrap(), 0.5);
        let s = auc_statistic(&[1.0f32, 1.0, 0.0], &[true, false, false]).unwrap();
        assert_eq!(s, AucStatistic { twice_u: 3, n_pos: 1, n_neg: 2 });
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }
}
