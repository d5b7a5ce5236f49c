use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::adversarial::Label;
use crate::dataset::EvalRecord;
use crate::error::{Error, Result};

/// Declared ranges of the known human-rating dimensions.
pub const RATING_RANGES: [(&str, f64, f64); 3] = [
    ("grammaticality", 1.0, 3.0),
    ("answerability", 1.0, 3.0),
    ("relevance", 1.0, 2.0),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub sample_id: String,
    pub metrics: BTreeMap<String, f64>,
    pub human: BTreeMap<String, f64>,
    /// `true` for positives in an adversarial table.
    pub label: Option<bool>,
}

/// Per-sample metric scores with optional human ratings and labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    pub metrics: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let metrics: Vec<String> = rows
            .first()
            .map(|r| r.metrics.keys().cloned().collect())
            .unwrap_or_default();
        for r in &rows {
            if !r.metrics.keys().eq(metrics.iter()) {
                return Err(Error::InvalidConfig(format!(
                    "row {} has metrics {:?}, expected {:?}",
                    r.sample_id,
                    r.metrics.keys().collect::<Vec<_>>(),
                    metrics
                )));
            }
            check_ratings(r)?;
        }
        Ok(Self { metrics, rows })
    }

    /// Human-rating dimensions present in any row, sorted.
    pub fn dimensions(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.human.keys()).collect();
        set.into_iter().cloned().collect()
    }

    pub fn has_metric(&self, metric: &str) -> bool {
        self.metrics.iter().any(|m| m == metric)
    }

    /// `(metric, rating)` pairs of rows that carry `dimension`.
    pub fn paired(&self, metric: &str, dimension: &str) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .filter_map(|r| Some((*r.metrics.get(metric)?, *r.human.get(dimension)?)))
            .unzip()
    }

    /// Copies ratings and labels from dataset records with matching ids,
    /// keeping values the table already has. Returns the match count.
    pub fn attach_records(&mut self, records: &[EvalRecord]) -> Result<usize> {
        let by_id: HashMap<&str, &EvalRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
        let mut hits = 0;
        for row in &mut self.rows {
            let Some(rec) = by_id.get(row.sample_id.as_str()) else {
                continue;
            };
            hits += 1;
            for (k, v) in &rec.human {
                row.human.entry(k.clone()).or_insert(*v);
            }
            if row.label.is_none() {
                row.label = rec.label.map(|l| l == Label::Positive);
            }
            check_ratings(row)?;
        }
        Ok(hits)
    }

    /// JSON lines: `id` (or `sample_id`), optional `label` and `human`
    /// object; every other numeric field is a metric. Non-numeric fields
    /// and nulls are ignored, and `human.<dim>` keys are ratings.
    pub fn from_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let row_err = |reason: String| Error::Row {
                path: path.to_path_buf(),
                line: k + 1,
                reason,
            };
            let value: Value = serde_json::from_str(t).map_err(|e| row_err(e.to_string()))?;
            let obj = value.as_object().ok_or_else(|| row_err("row is not an object".into()))?;
            let sample_id = ["id", "sample_id"]
                .iter()
                .find_map(|k| obj.get(*k).and_then(id_string))
                .ok_or_else(|| row_err("missing id".into()))?;
            let mut row = ScoreRow {
                sample_id,
                metrics: BTreeMap::new(),
                human: BTreeMap::new(),
                label: None,
            };
            for (key, v) in obj {
                match key.as_str() {
                    "id" | "sample_id" => {}
                    "label" => row.label = parse_label(v).map_err(row_err)?,
                    "human" => {
                        if let Some(h) = v.as_object() {
                            for (dim, r) in h {
                                if let Some(x) = r.as_f64() {
                                    row.human.insert(dim.clone(), x);
                                }
                            }
                        }
                    }
                    _ => {
                        if let Some(x) = v.as_f64() {
                            match key.strip_prefix("human.") {
                                Some(dim) => row.human.insert(dim.to_string(), x),
                                None => row.metrics.insert(key.clone(), x),
                            };
                        }
                    }
                }
            }
            rows.push(row);
        }
        Self::new(rows)
    }

    /// CSV with a header row: an `id` (or `sample_id`) column, optional
    /// `label`, `human.<dim>` rating columns, and numeric metric columns.
    /// Lines starting with `#` are skipped.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let malformed = |reason: String| Error::Malformed {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => malformed(format!("{other:?}")),
            })?;
        let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
        let id_col = headers
            .iter()
            .position(|h| h == "id" || h == "sample_id")
            .ok_or_else(|| malformed("no id column".into()))?;
        let mut rows = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| malformed(e.to_string()))?;
            let row_err = |reason: String| Error::Row {
                path: path.to_path_buf(),
                line: rec.position().map_or(k + 2, |p| p.line() as usize),
                reason,
            };
            let mut row = ScoreRow {
                sample_id: rec.get(id_col).unwrap_or_default().to_string(),
                metrics: BTreeMap::new(),
                human: BTreeMap::new(),
                label: None,
            };
            for (c, (h, cell)) in headers.iter().zip(rec.iter()).enumerate() {
                if c == id_col || cell.is_empty() {
                    continue;
                }
                if h == "label" {
                    row.label = parse_label(&Value::String(cell.to_string())).map_err(row_err)?;
                    continue;
                }
                let x: f64 = cell
                    .parse()
                    .map_err(|_| row_err(format!("column {h}: not a number: {cell}")))?;
                match h.strip_prefix("human.") {
                    Some(dim) => row.human.insert(dim.to_string(), x),
                    None => row.metrics.insert(h.to_string(), x),
                };
            }
            rows.push(row);
        }
        Self::new(rows)
    }

    /// Picks the reader from the file extension (`.csv`, otherwise JSON lines).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::from_csv(path),
            _ => Self::from_jsonl(path),
        }
    }
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_label(v: &Value) -> std::result::Result<Option<bool>, String> {
    match v {
        Value::Null => Ok(None),
        Value::Bool(b) => Ok(Some(*b)),
        Value::Number(n) => match n.as_f64() {
            Some(1.0) => Ok(Some(true)),
            Some(0.0) => Ok(Some(false)),
            _ => Err(format!("label must be 0 or 1, got {n}")),
        },
        Value::String(s) => match s.to_ascii_lowercase().as_str() {
            "positive" | "pos" | "1" | "true" => Ok(Some(true)),
            "negative" | "neg" | "0" | "false" => Ok(Some(false)),
            other => Err(format!("unrecognized label {other}")),
        },
        other => Err(format!("unrecognized label {other}")),
    }
}

fn check_ratings(row: &ScoreRow) -> Result<()> {
    for (dim, lo, hi) in RATING_RANGES {
        if let Some(&x) = row.human.get(dim) {
            if !(lo..=hi).contains(&x) {
                return Err(Error::InvalidConfig(format!(
                    "row {}: {dim} rating {x} outside [{lo}, {hi}]",
                    row.sample_id
                )));
            }
        }
    }
    Ok(())
}
