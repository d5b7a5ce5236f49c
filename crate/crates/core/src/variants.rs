//! The ablation grid and the transport-weighted aggregation.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relevance::{Aggregation, GainMode, GrgConfig, LrmConfig};
use crate::scalar::Scalar;
use crate::transport::uniform_plan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantTag {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
    M8,
    M9,
    #[serde(rename = "full")]
    Full,
}

impl VariantTag {
    pub const ALL: [VariantTag; 10] = [
        VariantTag::M1,
        VariantTag::M2,
        VariantTag::M3,
        VariantTag::M4,
        VariantTag::M5,
        VariantTag::M6,
        VariantTag::M7,
        VariantTag::M8,
        VariantTag::M9,
        VariantTag::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantTag::M1 => "M1",
            VariantTag::M2 => "M2",
            VariantTag::M3 => "M3",
            VariantTag::M4 => "M4",
            VariantTag::M5 => "M5",
            VariantTag::M6 => "M6",
            VariantTag::M7 => "M7",
            VariantTag::M8 => "M8",
            VariantTag::M9 => "M9",
            VariantTag::Full => "full",
        }
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    LrmOnly,
    GrgOnly,
    Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec<F> {
    pub tag: VariantTag,
    pub lrm: Option<LrmConfig<F>>,
    pub grg: Option<GrgConfig<F>>,
    pub combine: Combine,
}

impl<F: Scalar> VariantSpec<F> {
    /// Sets the component baselines that this variant uses.
    pub fn with_baselines(mut self, b_lrm: F, b_grg: F) -> Self {
        if let Some(l) = self.lrm.as_mut() {
            l.baseline = b_lrm;
        }
        if let Some(g) = self.grg.as_mut() {
            g.baseline = b_grg;
        }
        self
    }

    pub fn validate(&self, num_layers: usize) -> Result<()> {
        if let Some(l) = &self.lrm {
            l.validate(num_layers)?;
        }
        if let Some(g) = &self.grg {
            g.validate()?;
        }
        Ok(())
    }
}

/// Configuration of one grid cell for a masked LM with `num_layers` layers.
///
/// The layer subsets of M2 to M5 index 12-layer encoders.
pub fn variant_config<F: Scalar>(tag: VariantTag, num_layers: usize) -> Result<VariantSpec<F>> {
    let lrm = |layers: Vec<usize>, agg: Aggregation| {
        Some(LrmConfig {
            layers,
            p: F::one(),
            agg,
            baseline: F::zero(),
        })
    };
    let all: Vec<usize> = (0..num_layers).collect();
    let grg = |gain_mode| {
        Some(GrgConfig {
            gain_mode,
            ..GrgConfig::default()
        })
    };
    let (lrm_cfg, grg_cfg, combine) = match tag {
        VariantTag::M1 => (lrm(all, Aggregation::Max), None, Combine::LrmOnly),
        VariantTag::M2 => (lrm(vec![0, 1, 2, 3], Aggregation::Max), None, Combine::LrmOnly),
        VariantTag::M3 => (lrm(vec![4, 5, 6, 7], Aggregation::Max), None, Combine::LrmOnly),
        VariantTag::M4 => (lrm(vec![8, 9, 10, 11], Aggregation::Max), None, Combine::LrmOnly),
        VariantTag::M5 => (lrm(vec![0, 3, 7, 11], Aggregation::Max), None, Combine::LrmOnly),
        VariantTag::M6 => (lrm(all, Aggregation::Avg), None, Combine::LrmOnly),
        VariantTag::M7 => (lrm(all, Aggregation::Emd), None, Combine::LrmOnly),
        VariantTag::M8 => (None, grg(GainMode::Ratio), Combine::GrgOnly),
        VariantTag::M9 => (None, grg(GainMode::Absolute), Combine::GrgOnly),
        VariantTag::Full => (lrm(all, Aggregation::Max), grg(GainMode::Ratio), Combine::Harmonic),
    };
    let spec = VariantSpec {
        tag,
        lrm: lrm_cfg,
        grg: grg_cfg,
        combine,
    };
    spec.validate(num_layers)?;
    Ok(spec)
}

/// Transport-weighted layer precision.
///
/// Each candidate row of the optimal uniform-marginal plan for `cost`,
/// scaled by `M`, is a distribution over context tokens; the row-weighted
/// similarities are averaged over candidate tokens, which equals
/// `sum_mn T_mn * sim_mn`.
///
/// If the iterative solver fails to converge, falls back to the mean over
/// context tokens with a warning.
pub fn emd_aggregate<F: Scalar>(similarity: &Array2<F>, cost: &Array2<F>) -> Result<F> {
    let (m, n) = similarity.dim();
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput("similarity matrix"));
    }
    if cost.dim() != (m, n) {
        return Err(Error::Transport("cost and similarity shapes differ".into()));
    }
    match uniform_plan(cost.view()) {
        Ok(plan) => {
            let mut acc = F::zero();
            for (t, s) in plan.iter().zip(similarity.iter()) {
                acc += *t * *s;
            }
            Ok(acc)
        }
        Err(Error::Transport(reason)) => {
            log::warn!("{reason}; using mean aggregation for this layer");
            Ok(similarity.sum() / F::from_count(m * n))
        }
        Err(e) => Err(e),
    }
}
