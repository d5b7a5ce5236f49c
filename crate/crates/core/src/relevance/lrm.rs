use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::attention::{cosine_matrix, cross_attention};
use crate::backend::{LayerActivations, TokenizedPair};
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};
use crate::variants::emd_aggregate;

/// How `a_mn * cos` terms are pooled over context tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Max,
    Avg,
    Emd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrmConfig<F> {
    /// 0-based transformer layer indices.
    pub layers: Vec<usize>,
    pub p: F,
    pub agg: Aggregation,
    pub baseline: F,
}

impl<F: Scalar> LrmConfig<F> {
    /// All layers, `p = 1`, max aggregation, zero baseline.
    pub fn all_layers(num_layers: usize) -> Self {
        Self {
            layers: (0..num_layers).collect(),
            p: F::one(),
            agg: Aggregation::Max,
            baseline: F::zero(),
        }
    }

    pub fn with_baseline(mut self, baseline: F) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn validate(&self, num_layers: usize) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("LRM layer set is empty".into()));
        }
        if let Some(&layer) = self.layers.iter().find(|&&l| l >= num_layers) {
            return Err(Error::LayerOutOfRange { layer, num_layers });
        }
        if !(self.p >= F::one()) {
            return Err(Error::InvalidConfig(format!("power-mean exponent {:?} < 1", self.p)));
        }
        if !(self.baseline < F::one()) {
            return Err(Error::InvalidConfig(format!("LRM baseline {:?} >= 1", self.baseline)));
        }
        Ok(())
    }
}

fn is_odd_integer<F: Scalar>(p: F) -> bool {
    p.fract() == F::zero() && (p.as_f64() % 2.0).abs() == 1.0
}

/// Generalized mean `(mean v^p)^(1/p)`.
///
/// For exponents other than odd integers, negative values are clamped to 0
/// first; odd exponents keep the sign through a sign-aware root.
pub fn power_mean<F: Scalar>(values: &[F], p: F) -> Result<F> {
    if values.is_empty() {
        return Err(Error::EmptyInput("power mean of no values"));
    }
    if p == F::one() {
        return Ok(scalar::mean(values).expect("non-empty"));
    }
    let odd = is_odd_integer(p);
    let powered: Vec<F> = values
        .iter()
        .map(|&v| {
            if odd {
                v.signum() * v.abs().powf(p)
            } else {
                v.max(F::zero()).powf(p)
            }
        })
        .collect();
    let m = scalar::mean(&powered).expect("non-empty");
    Ok(m.signum() * m.abs().powf(F::one() / p))
}

/// `clamp((raw - b) / (1 - b), 0, 1)`.
pub fn rescale<F: Scalar>(raw: F, baseline: F) -> F {
    scalar::clamp((raw - baseline) / (F::one() - baseline), F::zero(), F::one())
}

/// Pools the `[M, N]` matrices of one layer into a precision score.
pub fn aggregate<F: Scalar>(attention: &Array2<F>, cosine: &Array2<F>, agg: Aggregation) -> Result<F> {
    let (m, n) = attention.dim();
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput("similarity matrix"));
    }
    let sim = attention * cosine;
    let per_token = |f: &dyn Fn(ndarray::ArrayView1<'_, F>) -> F| {
        let rows: Vec<F> = sim.rows().into_iter().map(f).collect();
        scalar::mean(&rows).expect("non-empty")
    };
    Ok(match agg {
        Aggregation::Max => per_token(&|r| r.iter().copied().fold(F::neg_infinity(), F::max)),
        Aggregation::Avg => per_token(&|r| r.sum() / F::from_count(n)),
        Aggregation::Emd => {
            let cost = cosine.mapv(|c| F::one() - c);
            emd_aggregate(&sim, &cost)?
        }
    })
}

/// Precision of the candidate against the context at one layer.
pub fn layer_precision<F: Scalar>(
    acts: &LayerActivations<F>,
    pair: &TokenizedPair,
    layer: usize,
    agg: Aggregation,
) -> Result<F> {
    let a = cross_attention(acts, pair, layer)?;
    let c = cosine_matrix(acts, pair, layer)?;
    aggregate(&a, &c, agg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn power_mean_reference_values() {
        assert!((power_mean(&[0.2, 0.4], 1.0).unwrap() - 0.3f64).abs() < 1e-15);
        let want = ((0.01f64 + 0.81) / 2.0).sqrt();
        assert!((power_mean(&[0.1, 0.9], 2.0).unwrap() - want).abs() < 1e-15);
        assert!((power_mean(&[0.5f64; 3], 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(power_mean::<f64>(&[], 1.0).is_err());
    }

    #[test]
    fn negative_values_under_even_and_odd_exponents() {
        // Even: the negative entry is clamped to 0.
        let even = power_mean(&[-0.4f64, 0.4], 2.0).unwrap();
        assert!((even - (0.16f64 / 2.0).sqrt()).abs() < 1e-15);
        // Odd: cubes cancel.
        assert!(power_mean(&[-0.4f64, 0.4], 3.0).unwrap().abs() < 1e-15);
        let neg = power_mean(&[-0.4f64, -0.2], 3.0).unwrap();
        assert!((neg + ((0.064f64 + 0.008) / 2.0).cbrt()).abs() < 1e-15);
    }

    #[test]
    fn rescale_anchors() {
        assert_eq!(rescale(0.3f64, 0.3), 0.0);
        assert_eq!(rescale(1.0f64, 0.3), 1.0);
        assert_eq!(rescale(0.1f64, 0.3), 0.0);
        assert!((rescale(0.65f64, 0.3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn avg_never_exceeds_max() {
        let a = array![[0.6f64, 0.4], [0.1, 0.9]];
        let c = array![[0.5f64, -0.2], [0.8, 0.3]];
        let max = aggregate(&a, &c, Aggregation::Max).unwrap();
        let avg = aggregate(&a, &c, Aggregation::Avg).unwrap();
        assert!(avg <= max);
        assert!((max - (0.3 + 0.27) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_pair_reduces_to_weighted_cosine() {
        let a = array![[1.0f64]];
        let c = array![[0.42f64]];
        for agg in [Aggregation::Max, Aggregation::Avg, Aggregation::Emd] {
            assert!((aggregate(&a, &c, agg).unwrap() - 0.42).abs() < 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        let cfg = LrmConfig::<f64>::all_layers(12);
        assert!(cfg.validate(12).is_ok());
        assert!(cfg.validate(11).is_err());
        assert!(cfg.clone().with_baseline(1.0).validate(12).is_err());
        let mut low_p = cfg;
        low_p.p = 0.5;
        assert!(low_p.validate(12).is_err());
    }
}
