use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{entity_swap, extract_entities, pronoun_swap, sentence_negation, PerturbationKind};
use crate::dataset::EntityAnnotation;
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

/// A question to perturb, with its context.
#[derive(Debug, Clone)]
pub struct AdversarialAnchor<'a> {
    pub id: &'a str,
    pub question: &'a str,
    pub context: &'a str,
    pub entities: &'a [EntityAnnotation],
}

/// One labeled output row. Positives carry `kind = None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialRow {
    pub question: String,
    pub context: String,
    pub label: Label,
    pub kind: Option<PerturbationKind>,
    pub seed: u64,
    pub original_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetCounts {
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarialSet {
    pub rows: Vec<AdversarialRow>,
    /// Negatives per kind, in `PerturbationKind::ALL` order.
    pub per_kind: Vec<(PerturbationKind, usize)>,
    /// True when fewer rows than requested could be built.
    pub partial: bool,
}

fn perturb(anchor: &AdversarialAnchor<'_>, kind: PerturbationKind, seed: u64) -> Result<String> {
    let p = match kind {
        PerturbationKind::EntitySwap => {
            let inv = extract_entities(anchor.question, anchor.context, anchor.entities);
            entity_swap(anchor.question, &inv, seed)?
        }
        PerturbationKind::PronounSwap => pronoun_swap(anchor.question, seed)?,
        PerturbationKind::SentenceNegation => sentence_negation(anchor.question, seed)?,
    };
    Ok(p.transformed)
}

/// Builds positives (unmodified anchors) and negatives (one perturbation per
/// anchor, kinds taken round-robin; a kind that does not apply to an anchor
/// passes its turn to the next kind).
pub fn build_adversarial_set(
    anchors: &[AdversarialAnchor<'_>],
    counts: SetCounts,
    kinds: &[PerturbationKind],
    seed: u64,
) -> Result<AdversarialSet> {
    if anchors.is_empty() {
        return Err(Error::EmptyInput("no anchors"));
    }
    if kinds.is_empty() && counts.negatives > 0 {
        return Err(Error::InvalidConfig("no perturbation kinds enabled".into()));
    }
    let mut order: Vec<usize> = (0..anchors.len()).collect();
    order.shuffle(&mut rng_for(seed, "adversarial-order"));

    let mut rows = Vec::with_capacity(counts.positives + counts.negatives);
    for &i in order.iter().take(counts.positives) {
        let a = &anchors[i];
        rows.push(AdversarialRow {
            question: a.question.to_string(),
            context: a.context.to_string(),
            label: Label::Positive,
            kind: None,
            seed,
            original_id: a.id.to_string(),
        });
    }

    let mut per_kind = vec![0usize; PerturbationKind::ALL.len()];
    let mut turn = 0usize;
    let mut negatives = 0usize;
    for &i in &order {
        if negatives == counts.negatives {
            break;
        }
        let a = &anchors[i];
        for step in 0..kinds.len() {
            let kind = kinds[(turn + step) % kinds.len()];
            let row_seed = derive_seed(seed, &format!("{}/{}", a.id, kind.as_str()));
            match perturb(a, kind, row_seed) {
                Ok(question) => {
                    rows.push(AdversarialRow {
                        question,
                        context: a.context.to_string(),
                        label: Label::Negative,
                        kind: Some(kind),
                        seed: row_seed,
                        original_id: a.id.to_string(),
                    });
                    let slot = PerturbationKind::ALL.iter().position(|&k| k == kind).expect("known kind");
                    per_kind[slot] += 1;
                    negatives += 1;
                    turn = (turn + step + 1) % kinds.len();
                    break;
                }
                Err(Error::NotApplicable(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    let positives = counts.positives.min(anchors.len());
    let partial = positives < counts.positives || negatives < counts.negatives;
    if partial {
        log::warn!(
            "adversarial set is partial: {positives}/{} positives, {negatives}/{} negatives",
            counts.positives,
            counts.negatives
        );
    }
    Ok(AdversarialSet {
        rows,
        per_kind: PerturbationKind::ALL.iter().copied().zip(per_kind).collect(),
        partial,
    })
}
