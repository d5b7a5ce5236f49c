//! Dense kernels shared by the encoder and decoder forwards.

use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut1, Axis};

use crate::scalar::Scalar;

pub(crate) struct Linear<F> {
    /// `[in, out]`
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Scalar> Linear<F> {
    pub fn forward(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        let mut y = x.dot(&self.weight);
        y += &self.bias;
        y
    }
}

pub(crate) struct LayerNorm<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
    pub eps: F,
}

impl<F: Scalar> LayerNorm<F> {
    pub fn forward_inplace(&self, x: &mut Array2<F>) {
        let d = F::from_count(x.ncols());
        for mut row in x.axis_iter_mut(Axis(0)) {
            let mean = row.iter().copied().sum::<F>() / d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / d;
            let inv = F::one() / (var + self.eps).sqrt();
            for ((v, &g), &b) in row.iter_mut().zip(&self.gamma).zip(&self.beta) {
                *v = (*v - mean) * inv * g + b;
            }
        }
    }
}

/// Numerically stable in-place softmax of one row.
pub(crate) fn softmax_inplace<F: Scalar>(mut row: ArrayViewMut1<'_, F>) {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let mut total = F::zero();
    for v in row.iter_mut() {
        *v = if *v == F::neg_infinity() { F::zero() } else { (*v - max).exp() };
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// `log softmax(row)[index]`.
pub(crate) fn log_softmax_at<F: Scalar>(row: ndarray::ArrayView1<'_, F>, index: usize) -> F {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = row.iter().map(|&v| (v - max).exp()).sum::<F>().ln() + max;
    F::min(row[index] - lse, F::zero())
}

/// Exact (erf) GELU.
pub(crate) fn gelu_inplace<F: Scalar>(x: &mut Array2<F>) {
    let half = F::lit(0.5);
    let inv_sqrt2 = F::lit(std::f64::consts::FRAC_1_SQRT_2);
    x.mapv_inplace(|v| half * v * (F::one() + (v * inv_sqrt2).erf()));
}

/// Tanh-approximated GELU used by GPT-2.
pub(crate) fn gelu_tanh_inplace<F: Scalar>(x: &mut Array2<F>) {
    let half = F::lit(0.5);
    let c = F::lit((2.0 / std::f64::consts::PI).sqrt());
    let k = F::lit(0.044715);
    x.mapv_inplace(|v| half * v * (F::one() + (c * (v + k * v * v * v)).tanh()));
}
