use serde::Serialize;

use super::table::ScoreTable;
use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 20;

/// Summary of one rating group. `group` is the rounded rating, or `None`
/// when the distribution is not grouped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: Option<i64>,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Counts over 20 equal-width bins of `[0, 1]`; the last bin is closed.
    pub histogram: Vec<usize>,
    pub below_range: usize,
    pub above_range: usize,
}

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn histogram_bin(x: f64) -> Option<usize> {
    if !(0.0..=1.0).contains(&x) {
        return None;
    }
    Some(((x * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1))
}

pub fn summarize(values: &[f64], group: Option<i64>) -> Result<GroupSummary> {
    if values.is_empty() {
        return Err(Error::Undefined("empty group".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut histogram = vec![0; HISTOGRAM_BINS];
    let (mut below_range, mut above_range) = (0, 0);
    for &x in values {
        match histogram_bin(x) {
            Some(b) => histogram[b] += 1,
            None if x < 0.0 => below_range += 1,
            None => above_range += 1,
        }
    }
    Ok(GroupSummary {
        group,
        count: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        histogram,
        below_range,
        above_range,
    })
}

/// Distribution of `metric`, split by `group_by` ratings rounded to the
/// nearest integer (half away from zero). Groups are in ascending order.
pub fn score_distribution(table: &ScoreTable, metric: &str, group_by: Option<&str>) -> Result<Vec<GroupSummary>> {
    if !table.has_metric(metric) {
        return Err(Error::InvalidConfig(format!("metric {metric} not in table")));
    }
    let Some(dim) = group_by else {
        let v: Vec<f64> = table.rows.iter().map(|r| r.metrics[metric]).collect();
        return Ok(vec![summarize(&v, None)?]);
    };
    let mut groups: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for r in &table.rows {
        if let Some(&rating) = r.human.get(dim) {
            groups.entry(rating.round() as i64).or_default().push(r.metrics[metric]);
        }
    }
    if groups.is_empty() {
        return Err(Error::Undefined(format!("empty group: no rows rated on {dim}")));
    }
    groups.into_iter().map(|(g, v)| summarize(&v, Some(g))).collect()
}
