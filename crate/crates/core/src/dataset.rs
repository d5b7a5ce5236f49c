//! Dataset ingestion: JSON-lines records and SQuAD-format files.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adversarial::{AdversarialRow, EntityGroup, Label};
use crate::error::{Error, Result};

/// A pre-annotated entity mention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityAnnotation {
    pub text: String,
    pub group: EntityGroup,
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub context: String,
    /// Generated question; absent in SQuAD files until predictions are merged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub human: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entities: Vec<EntityAnnotation>,
    /// Positive/negative label of adversarial rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl EvalRecord {
    pub fn candidate(&self) -> Result<&str> {
        self.candidate
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig(format!("record {} has no candidate", self.id)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Jsonl,
    SquadJson,
    /// Labeled rows written by the adversarial set builder.
    Adversarial,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "squad_json" | "squad" => Ok(DatasetFormat::SquadJson),
            "adversarial" => Ok(DatasetFormat::Adversarial),
            other => Err(Error::InvalidConfig(format!("unknown dataset format {other}"))),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Vec<EvalRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = match format {
        DatasetFormat::Jsonl => parse_jsonl(path, &text)?,
        DatasetFormat::SquadJson => parse_squad(path, &text)?,
        DatasetFormat::Adversarial => parse_adversarial(path, &text)?,
    };
    check_unique(&records)?;
    Ok(records)
}

fn check_unique(records: &[EvalRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

/// Blank lines and `#` header lines are skipped by the line-based readers.
pub(crate) fn is_blank_or_comment(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

const REQUIRED: [&str; 3] = ["id", "context", "candidate"];

fn parse_jsonl(path: &Path, text: &str) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if is_blank_or_comment(line) {
            continue;
        }
        let row_err = |reason: String| Error::Row {
            path: path.to_path_buf(),
            line: k + 1,
            reason,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| row_err(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| row_err("row is not a JSON object".into()))?;
        let missing: Vec<&str> = REQUIRED
            .iter()
            .copied()
            .filter(|f| obj.get(*f).and_then(|v| v.as_str()).is_none_or(|s| s.trim().is_empty()))
            .collect();
        if !missing.is_empty() {
            return Err(row_err(format!("missing or empty field(s): {}", missing.join(", "))));
        }
        let record: EvalRecord =
            serde_json::from_value(value).map_err(|e| row_err(e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

/// Adversarial rows get the id `{original_id}/{kind}`, with `original` for positives.
fn parse_adversarial(path: &Path, text: &str) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if is_blank_or_comment(line) {
            continue;
        }
        let row: AdversarialRow = serde_json::from_str(line).map_err(|e| Error::Row {
            path: path.to_path_buf(),
            line: k + 1,
            reason: e.to_string(),
        })?;
        let kind = row.kind.map_or("original", |k| k.as_str());
        out.push(EvalRecord {
            id: format!("{}/{kind}", row.original_id),
            context: row.context,
            candidate: Some(row.question),
            answer: None,
            references: Vec::new(),
            human: BTreeMap::new(),
            entities: Vec::new(),
            label: Some(row.label),
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct SquadFile {
    data: Vec<SquadArticle>,
}

#[derive(Deserialize)]
struct SquadArticle {
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Deserialize)]
struct SquadQa {
    id: String,
    question: String,
    #[serde(default)]
    answers: Vec<SquadAnswer>,
}

#[derive(Deserialize)]
struct SquadAnswer {
    text: String,
}

fn parse_squad(path: &Path, text: &str) -> Result<Vec<EvalRecord>> {
    let file: SquadFile = serde_json::from_str(text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for article in file.data {
        for para in article.paragraphs {
            for qa in para.qas {
                out.push(EvalRecord {
                    id: qa.id,
                    context: para.context.clone(),
                    candidate: None,
                    answer: qa.answers.into_iter().next().map(|a| a.text),
                    references: vec![qa.question],
                    human: BTreeMap::new(),
                    entities: Vec::new(),
                    label: None,
                });
            }
        }
    }
    Ok(out)
}

/// Reads predictions as a JSON object `{id: question}` or JSON lines
/// `{"id": .., "candidate": ..}`.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<HashMap<String, String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(map) = serde_json::from_str::<HashMap<String, String>>(&text) {
        return Ok(map);
    }
    let mut out = HashMap::new();
    for (k, line) in text.lines().enumerate() {
        if is_blank_or_comment(line) {
            continue;
        }
        #[derive(Deserialize)]
        struct Row {
            id: String,
            candidate: String,
        }
        let row: Row = serde_json::from_str(line).map_err(|e| Error::Row {
            path: path.to_path_buf(),
            line: k + 1,
            reason: e.to_string(),
        })?;
        if out.insert(row.id.clone(), row.candidate).is_some() {
            return Err(Error::DuplicateId(row.id));
        }
    }
    Ok(out)
}

/// Fills `candidate` for records whose id has a prediction; returns the match count.
pub fn merge_predictions(records: &mut [EvalRecord], predictions: &HashMap<String, String>) -> usize {
    let mut hits = 0;
    for r in records.iter_mut() {
        if let Some(p) = predictions.get(&r.id) {
            r.candidate = Some(p.clone());
            hits += 1;
        }
    }
    hits
}

/// Uses the first reference as the candidate where no candidate is set.
pub fn references_as_candidates(records: &mut [EvalRecord]) {
    for r in records.iter_mut() {
        if r.candidate.is_none() {
            r.candidate = r.references.first().cloned();
        }
    }
}
