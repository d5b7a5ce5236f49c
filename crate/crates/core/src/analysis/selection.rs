use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::table::ScoreTable;
use crate::error::{Error, Result};
use crate::seeding::rng_for;

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionConfig {
    pub k_folds: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k_folds: 5,
            repeats: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionStep {
    pub step: usize,
    /// Most frequent choice at this step across repeats.
    pub metric: String,
    pub votes: usize,
    pub repeats: usize,
    pub mean_mse: f64,
    pub mean_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedMetric {
    pub metric: String,
    pub after: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub target: String,
    pub n_samples: usize,
    pub steps: Vec<SelectionStep>,
    pub dropped: Vec<DroppedMetric>,
    /// Selection order of every repeat.
    pub paths: Vec<Vec<String>>,
}

/// Design matrix with an intercept column.
fn design(cols: &[&[f64]], rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            cols[j - 1][rows[i]]
        }
    })
}

pub fn full_rank(cols: &[&[f64]], n: usize) -> bool {
    let all: Vec<usize> = (0..n).collect();
    let x = design(cols, &all);
    let sv = x.singular_values();
    let max = sv.max();
    max > 0.0 && sv.iter().filter(|&&s| s > RANK_TOL * max).count() == cols.len() + 1
}

/// Cross-validated MSE and R² of a least-squares fit of `y` on `cols`.
/// R² is `1 - SSE / SST` with SST about the overall mean.
pub fn cv_mse(cols: &[&[f64]], y: &[f64], folds: &[Vec<usize>]) -> Result<(f64, f64)> {
    let n = y.len();
    let mut sse = 0.0;
    for (f, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let x = design(cols, &train);
        let b = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let beta = x
            .svd(true, true)
            .solve(&b, RANK_TOL)
            .map_err(|e| Error::Undefined(format!("least squares failed: {e}")))?;
        let xt = design(cols, test);
        let pred = xt * beta;
        for (k, &i) in test.iter().enumerate() {
            sse += (y[i] - pred[k]).powi(2);
        }
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((sse / n as f64, 1.0 - sse / sst))
}

pub fn make_folds(n: usize, k: usize, seed: u64, repeat: usize) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_for(seed, &format!("cv-folds/{repeat}")));
    (0..k).map(|f| perm[f * n / k..(f + 1) * n / k].to_vec()).collect()
}

struct Path {
    order: Vec<(String, f64, f64)>,
    dropped: Vec<DroppedMetric>,
}

fn greedy(names: &[String], cols: &[Vec<f64>], y: &[f64], folds: &[Vec<usize>]) -> Result<Path> {
    let n = y.len();
    let mut remaining: Vec<usize> = (0..names.len()).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut order = Vec::new();
    let mut dropped = Vec::new();
    while !remaining.is_empty() {
        let trials: Vec<Option<(f64, f64)>> = remaining
            .par_iter()
            .map(|&m| {
                let set: Vec<&[f64]> = selected.iter().chain([&m]).map(|&i| cols[i].as_slice()).collect();
                if !full_rank(&set, n) {
                    return Ok(None);
                }
                cv_mse(&set, y, folds).map(Some)
            })
            .collect::<Result<_>>()?;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut keep = Vec::new();
        for (&m, t) in remaining.iter().zip(&trials) {
            match t {
                None => dropped.push(DroppedMetric {
                    metric: names[m].clone(),
                    after: selected.iter().map(|&i| names[i].clone()).collect(),
                    reason: "rank-deficient design: metric is constant or a linear combination of selected metrics"
                        .into(),
                }),
                Some((mse, r2)) => {
                    keep.push(m);
                    if best.is_none_or(|(_, b, _)| *mse < b) {
                        best = Some((m, *mse, *r2));
                    }
                }
            }
        }
        let Some((m, mse, r2)) = best else { break };
        selected.push(m);
        order.push((names[m].clone(), mse, r2));
        remaining = keep.into_iter().filter(|&k| k != m).collect();
    }
    Ok(Path { order, dropped })
}

/// Greedy forward selection of metrics predicting the human rating
/// `target`, repeated over shuffled k-fold splits.
pub fn forward_selection(table: &ScoreTable, target: &str, cfg: SelectionConfig) -> Result<SelectionReport> {
    if table.metrics.len() < 2 {
        return Err(Error::InvalidConfig("forward selection needs at least 2 metrics".into()));
    }
    if cfg.k_folds < 2 || cfg.repeats == 0 {
        return Err(Error::InvalidConfig("need k_folds >= 2 and repeats >= 1".into()));
    }
    let rows: Vec<_> = table.rows.iter().filter(|r| r.human.contains_key(target)).collect();
    let n = rows.len();
    if n < 20 || n < cfg.k_folds {
        return Err(Error::DatasetTooSmall(format!(
            "{n} samples carry a {target} rating; forward selection needs at least 20"
        )));
    }
    let y: Vec<f64> = rows.iter().map(|r| r.human[target]).collect();
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::Undefined(format!("{target} ratings are constant")));
    }
    let cols: Vec<Vec<f64>> = table
        .metrics
        .iter()
        .map(|m| rows.iter().map(|r| r.metrics[m]).collect())
        .collect();

    let mut paths = Vec::with_capacity(cfg.repeats);
    let mut dropped: Vec<DroppedMetric> = Vec::new();
    for rep in 0..cfg.repeats {
        let folds = make_folds(n, cfg.k_folds, cfg.seed, rep);
        let p = greedy(&table.metrics, &cols, &y, &folds)?;
        for d in p.dropped {
            if !dropped.contains(&d) {
                log::warn!("dropping {} after {:?}: {}", d.metric, d.after, d.reason);
                dropped.push(d);
            }
        }
        paths.push(p.order);
    }

    let longest = paths.iter().map(Vec::len).max().unwrap_or(0);
    let mut steps = Vec::with_capacity(longest);
    for s in 0..longest {
        let at: Vec<&(String, f64, f64)> = paths.iter().filter_map(|p| p.get(s)).collect();
        let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
        for (m, _, _) in &at {
            *votes.entry(m.as_str()).or_default() += 1;
        }
        // Ties go to the metric that comes first in table order.
        let top = votes.values().copied().max().unwrap_or(0);
        let metric = table
            .metrics
            .iter()
            .find(|m| votes.get(m.as_str()) == Some(&top))
            .cloned()
            .unwrap_or_default();
        let k = at.len() as f64;
        steps.push(SelectionStep {
            step: s + 1,
            metric,
            votes: top,
            repeats: at.len(),
            mean_mse: at.iter().map(|t| t.1).sum::<f64>() / k,
            mean_r2: at.iter().map(|t| t.2).sum::<f64>() / k,
        });
    }
    Ok(SelectionReport {
        target: target.to_string(),
        n_samples: n,
        steps,
        dropped,
        paths: paths
            .into_iter()
            .map(|p| p.into_iter().map(|(m, _, _)| m).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::table::ScoreRow;
    use rand::Rng;

    fn table(n: usize, f: impl Fn(usize, &mut rand_chacha::ChaCha8Rng) -> (Vec<(&'static str, f64)>, f64)) -> ScoreTable {
        let mut rng = rng_for(7, "selection-test");
        let rows = (0..n)
            .map(|i| {
                let (m, y) = f(i, &mut rng);
                ScoreRow {
                    sample_id: i.to_string(),
                    metrics: m.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                    human: BTreeMap::from([("score".to_string(), y)]),
                    label: None,
                }
            })
            .collect();
        ScoreTable::new(rows).unwrap()
    }

    #[test]
    fn perfect_predictor_first() {
        let t = table(40, |_, rng| {
            let y: f64 = rng.gen();
            (vec![("a_noise", rng.gen()), ("b_exact", y), ("c_noise", rng.gen())], y)
        });
        let r = forward_selection(&t, "score", SelectionConfig::default()).unwrap();
        assert!(r.paths.iter().all(|p| p[0] == "b_exact"));
        assert!(r.steps[0].mean_mse < 1e-20);
        assert!((r.steps[0].mean_r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_column_adds_nothing() {
        let t = table(30, |_, rng| {
            let a: f64 = rng.gen();
            let y = a + 0.3 * rng.gen::<f64>();
            (vec![("a", a), ("a_copy", a), ("b", rng.gen())], y)
        });
        let y: Vec<f64> = t.rows.iter().map(|r| r.human["score"]).collect();
        let a: Vec<f64> = t.rows.iter().map(|r| r.metrics["a"]).collect();
        let folds = make_folds(30, 5, 1, 0);
        let one = cv_mse(&[&a], &y, &folds).unwrap();
        let two = cv_mse(&[&a, &a], &y, &folds).unwrap();
        assert!((one.0 - two.0).abs() < 1e-12);
        let r = forward_selection(&t, "score", SelectionConfig::default()).unwrap();
        assert!(r.dropped.iter().any(|d| d.metric.starts_with('a')));
    }

    #[test]
    fn noise_metric_is_chosen_last() {
        let t = table(200, |_, rng| {
            let (m1, m2): (f64, f64) = (rng.gen(), rng.gen());
            let y = 0.5 * m1 + 0.5 * m2 + 0.05 * (rng.gen::<f64>() - 0.5);
            (vec![("m1", m1), ("m2", m2), ("m3", rng.gen())], y)
        });
        let r = forward_selection(&t, "score", SelectionConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(r.steps.last().unwrap().metric, "m3");
    }

    #[test]
    fn too_few_samples() {
        let t = table(10, |_, rng| (vec![("a", rng.gen()), ("b", rng.gen())], rng.gen()));
        assert!(matches!(
            forward_selection(&t, "score", SelectionConfig::default()),
            Err(Error::DatasetTooSmall(_))
        ));
    }
}
