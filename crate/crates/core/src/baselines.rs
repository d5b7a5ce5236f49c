//! Rescaling lower bounds estimated from mismatched candidate/context pairs.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::Fingerprint;
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};
use crate::scorer::Scorer;
use crate::seeding::rng_for;
use crate::variants::{VariantSpec, VariantTag};

/// Lower bounds for one variant.
///
/// A component the variant does not use has baseline 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats<F> {
    pub b_lrm: F,
    pub b_grg: F,
    pub n_pairs: usize,
    pub seed: u64,
    pub dataset_id: String,
    pub mlm_fingerprint: Option<Fingerprint>,
    pub clm_fingerprint: Option<Fingerprint>,
    pub variant_tag: VariantTag,
}

impl<F: Scalar> BaselineStats<F> {
    /// Applies these bounds to `spec`.
    pub fn apply(&self, spec: VariantSpec<F>) -> VariantSpec<F> {
        spec.with_baselines(self.b_lrm, self.b_grg)
    }
}

/// `min(1000, n)`.
pub fn default_n_pairs(n_records: usize) -> usize {
    n_records.min(1000)
}

/// Number of ordered pairs `(i, j)` whose contexts differ.
pub fn feasible_pairs(contexts: &[&str]) -> usize {
    let mut groups: HashMap<&str, usize> = HashMap::new();
    for c in contexts {
        *groups.entry(c).or_default() += 1;
    }
    let n = contexts.len();
    n * n - groups.values().map(|g| g * g).sum::<usize>()
}

/// Draws `n_pairs` distinct ordered `(candidate, context)` index pairs whose
/// contexts differ, so no candidate meets its own context.
pub fn sample_pairs(contexts: &[&str], n_pairs: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let n = contexts.len();
    if n < 2 {
        return Err(Error::DatasetTooSmall(format!("{n} records; need at least 2")));
    }
    if n_pairs == 0 {
        return Err(Error::InvalidConfig("n_pairs must be at least 1".into()));
    }
    let feasible = feasible_pairs(contexts);
    if n_pairs > feasible {
        return Err(Error::DatasetTooSmall(format!(
            "{n_pairs} pairs requested but only {feasible} mismatched pairs exist"
        )));
    }
    let mut rng = rng_for(seed, "baseline-pairs");
    if 2 * n_pairs > feasible {
        let all: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| contexts[i] != contexts[j])
            .collect();
        return Ok(all.choose_multiple(&mut rng, n_pairs).copied().collect());
    }
    let mut seen = HashSet::with_capacity(n_pairs);
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if contexts[i] != contexts[j] && seen.insert((i, j)) {
            pairs.push((i, j));
        }
    }
    Ok(pairs)
}

/// A candidate/context row used for baseline estimation.
pub struct PairSource<'a> {
    pub candidate: &'a str,
    pub context: &'a str,
}

/// Estimates per-variant baselines from one shared set of mismatched pairs.
pub fn estimate_baselines<F: Scalar>(
    scorer: &Scorer<F>,
    rows: &[PairSource<'_>],
    n_pairs: usize,
    seed: u64,
    dataset_id: &str,
    specs: &[VariantSpec<F>],
) -> Result<Vec<BaselineStats<F>>> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("no variants to estimate".into()));
    }
    let contexts: Vec<&str> = rows.iter().map(|r| r.context).collect();
    let pairs = sample_pairs(&contexts, n_pairs, seed)?;
    let spec_refs: Vec<&VariantSpec<F>> = specs.iter().collect();

    // raws[pair][variant] = (lrm_raw, grg_raw)
    let raws: Vec<Vec<(Option<F>, Option<F>)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let ev = scorer.evidence(rows[i].candidate, rows[j].context, &spec_refs)?;
            specs
                .iter()
                .map(|s| {
                    let score = ev.score(s)?;
                    Ok((score.lrm_raw, score.grg_raw))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mlm_fp = scorer.mlm().ok().map(|m| m.handle().fingerprint.clone());
    let clm_fp = scorer.clm().ok().map(|m| m.handle().fingerprint.clone());
    let component_mean = |k: usize, pick: fn(&(Option<F>, Option<F>)) -> Option<F>| -> F {
        let values: Vec<F> = raws.iter().filter_map(|r| pick(&r[k])).collect();
        scalar::mean(&values).unwrap_or_else(F::zero)
    };
    Ok(specs
        .iter()
        .enumerate()
        .map(|(k, s)| BaselineStats {
            b_lrm: component_mean(k, |r| r.0),
            b_grg: component_mean(k, |r| r.1),
            n_pairs: pairs.len(),
            seed,
            dataset_id: dataset_id.to_string(),
            mlm_fingerprint: s.lrm.as_ref().and(mlm_fp.clone()),
            clm_fingerprint: s.grg.as_ref().and(clm_fp.clone()),
            variant_tag: s.tag,
        })
        .collect())
}

/// One stats object, or an array when there are several, as pretty JSON.
pub fn baselines_json<F: Scalar>(stats: &[BaselineStats<F>]) -> Result<String> {
    let mut text = match stats {
        [one] => serde_json::to_string_pretty(one)?,
        many => serde_json::to_string_pretty(many)?,
    };
    text.push('\n');
    Ok(text)
}

pub fn save_baselines<F: Scalar>(stats: &[BaselineStats<F>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, baselines_json(stats)?).map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`save_baselines`]. Lines starting with `#` are ignored.
pub fn load_baselines<F: Scalar>(path: impl AsRef<Path>) -> Result<Vec<BaselineStats<F>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |e: serde_json::Error| Error::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let body: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let value: serde_json::Value = serde_json::from_str(&body).map_err(malformed)?;
    let stats: Vec<BaselineStats<F>> = if value.is_array() {
        serde_json::from_value(value).map_err(malformed)?
    } else {
        vec![serde_json::from_value(value).map_err(malformed)?]
    };
    for s in &stats {
        if s.n_pairs == 0 {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                reason: format!("variant {} has n_pairs = 0", s.variant_tag),
            });
        }
    }
    Ok(stats)
}

/// Refuses stats estimated with other model files unless `allow_mismatch`.
pub fn check_fingerprints<F>(
    stats: &BaselineStats<F>,
    mlm: Option<&Fingerprint>,
    clm: Option<&Fingerprint>,
    allow_mismatch: bool,
) -> Result<()> {
    let checks = [
        ("masked LM", stats.mlm_fingerprint.as_ref(), mlm),
        ("causal LM", stats.clm_fingerprint.as_ref(), clm),
    ];
    for (model, expected, actual) in checks {
        if let (Some(e), Some(a)) = (expected, actual) {
            if e != a {
                if allow_mismatch {
                    log::warn!(
                        "baseline for {} was estimated with a different {model} ({e} vs {a}); using it anyway",
                        stats.variant_tag
                    );
                } else {
                    return Err(Error::FingerprintMismatch {
                        model,
                        expected: e.0.clone(),
                        actual: a.0.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Stats for `tag` from a loaded baseline file.
pub fn find_variant<F: Clone>(stats: &[BaselineStats<F>], tag: VariantTag) -> Result<BaselineStats<F>> {
    stats
        .iter()
        .find(|s| s.variant_tag == tag)
        .cloned()
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "baseline file has no entry for variant {tag}; rerun `baseline` with that variant"
            ))
        })
}
