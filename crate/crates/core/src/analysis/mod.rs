//! Agreement with human judgments and adversarial separation.
//!
//! Correlations and AUC are generic over the scalar type. Table-level
//! reports work in `f64`.

mod auc;
mod correlation;
mod distribution;
mod selection;
mod table;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use auc::{auc_statistic, roc_auc, AucStatistic};
pub use correlation::{average_ranks, kendall, pearson, spearman};
pub use distribution::{
    histogram_bin, quantile_sorted, score_distribution, summarize, GroupSummary, HISTOGRAM_BINS,
};
pub use selection::{
    cv_mse, forward_selection, full_rank, make_folds, DroppedMetric, SelectionConfig, SelectionReport,
    SelectionStep,
};
pub use table::{ScoreRow, ScoreTable, RATING_RANGES};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub metric: String,
    pub dimension: String,
    pub n: usize,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
}

fn defined(r: Result<f64>, what: &str, metric: &str, dim: &str) -> Option<f64> {
    r.map_err(|e| log::warn!("{what}({metric}, {dim}): {e}")).ok()
}

/// Pearson, Spearman and Kendall for every (metric, rating dimension) pair,
/// in table order. Undefined cells are `None`.
pub fn correlation_report(table: &ScoreTable) -> Vec<CorrelationRow> {
    let dims = table.dimensions();
    let cells: Vec<(&String, &String)> = table
        .metrics
        .iter()
        .flat_map(|m| dims.iter().map(move |d| (m, d)))
        .collect();
    cells
        .par_iter()
        .map(|&(m, d)| {
            let (x, y) = table.paired(m, d);
            CorrelationRow {
                metric: m.clone(),
                dimension: d.clone(),
                n: x.len(),
                pearson: defined(pearson(&x, &y), "pearson", m, d),
                spearman: defined(spearman(&x, &y), "spearman", m, d),
                kendall: defined(kendall(&x, &y), "kendall", m, d),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucRow {
    pub metric: String,
    pub n_pos: u64,
    pub n_neg: u64,
    pub auc: f64,
}

/// ROC-AUC of every metric over the labeled rows.
pub fn auc_report(table: &ScoreTable) -> Result<Vec<AucRow>> {
    let labeled: Vec<_> = table.rows.iter().filter_map(|r| Some((r, r.label?))).collect();
    let labels: Vec<bool> = labeled.iter().map(|(_, l)| *l).collect();
    table
        .metrics
        .par_iter()
        .map(|m| {
            let s: Vec<f64> = labeled.iter().map(|(r, _)| r.metrics[m]).collect();
            let stat = auc_statistic(&s, &labels)?;
            Ok(AucRow {
                metric: m.clone(),
                n_pos: stat.n_pos,
                n_neg: stat.n_neg,
                auc: stat.value(),
            })
        })
        .collect()
}

/// Writes `rows` as CSV with a header derived from the row fields.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}
