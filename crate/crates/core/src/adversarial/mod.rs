//! Negative question construction: entity swap, pronoun swap and sentence
//! negation, each a single seeded edit of the anchor question.

mod builder;
mod entities;
mod negation;
mod pronouns;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use builder::{build_adversarial_set, AdversarialAnchor, AdversarialRow, AdversarialSet, Label, SetCounts};
pub use entities::{entity_swap, extract_entities, EntityGroup, EntityInventory, EntityMention, MentionSource};
pub use negation::sentence_negation;
pub use pronouns::pronoun_swap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    EntitySwap,
    PronounSwap,
    SentenceNegation,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 3] = [
        PerturbationKind::EntitySwap,
        PerturbationKind::PronounSwap,
        PerturbationKind::SentenceNegation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::EntitySwap => "entity_swap",
            PerturbationKind::PronounSwap => "pronoun_swap",
            PerturbationKind::SentenceNegation => "sentence_negation",
        }
    }
}

impl std::str::FromStr for PerturbationKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        PerturbationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| crate::error::Error::InvalidConfig(format!("unknown perturbation {s}")))
    }
}

/// One edited question.
///
/// `original_span` is the replaced byte range of `original`; `edit_span` is
/// the byte range of its replacement in `transformed`. Outside these spans
/// the two texts are identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub original: String,
    pub transformed: String,
    pub original_span: Range<usize>,
    pub edit_span: Range<usize>,
    pub seed: u64,
}

impl Perturbation {
    pub(crate) fn replace(
        kind: PerturbationKind,
        original: &str,
        span: Range<usize>,
        replacement: &str,
        seed: u64,
    ) -> Self {
        let mut transformed = String::with_capacity(original.len() + replacement.len());
        transformed.push_str(&original[..span.start]);
        transformed.push_str(replacement);
        transformed.push_str(&original[span.end..]);
        Self {
            kind,
            original: original.to_string(),
            edit_span: span.start..span.start + replacement.len(),
            original_span: span,
            transformed,
            seed,
        }
    }
}

/// A word token with its byte range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Word<'a> {
    pub text: &'a str,
    pub span: Range<usize>,
}

pub(crate) fn words(text: &str) -> Vec<Word<'_>> {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    let re = RE.get_or_init(|| {
        regex::Regex::new(r"[A-Za-z0-9]+(?:[.,][0-9]+)*(?:['’][A-Za-z]+)?").expect("valid regex")
    });
    re.find_iter(text)
        .map(|m| Word {
            text: m.as_str(),
            span: m.range(),
        })
        .collect()
}

/// Copies the capitalization pattern of `like` onto `word`.
pub(crate) fn match_case(word: &str, like: &str) -> String {
    let mut chars = like.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let all_upper = like.chars().count() > 1 && like.chars().all(|c| !c.is_lowercase());
    if all_upper {
        word.to_uppercase()
    } else if first_upper {
        let mut out = String::with_capacity(word.len());
        let mut it = word.chars();
        if let Some(c) = it.next() {
            out.extend(c.to_uppercase());
        }
        out.extend(it);
        out
    } else {
        word.to_string()
    }
}
