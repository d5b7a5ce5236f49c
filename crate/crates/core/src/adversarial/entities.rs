use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{words, Perturbation, PerturbationKind, Word};
use crate::dataset::EntityAnnotation;
use crate::error::{Error, Result};
use crate::seeding::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityGroup {
    Person,
    LocationOrg,
    Number,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionSource {
    Question,
    Context,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub source: MentionSource,
}

/// Distinct entity surfaces per group, question mentions first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityInventory {
    pub groups: BTreeMap<EntityGroup, Vec<EntityMention>>,
}

impl EntityInventory {
    fn add(&mut self, group: EntityGroup, surface: &str, source: MentionSource) {
        let list = self.groups.entry(group).or_default();
        if !list.iter().any(|m| m.surface.eq_ignore_ascii_case(surface)) {
            list.push(EntityMention {
                surface: surface.to_string(),
                source,
            });
        }
    }

    pub fn group(&self, group: EntityGroup) -> &[EntityMention] {
        self.groups.get(&group).map_or(&[], Vec::as_slice)
    }
}

const ORDINAL_WORDS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    "eleventh", "twelfth", "hundredth", "thousandth",
];

const CARDINAL_WORDS: &[&str] = &[
    "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "twenty", "thirty", "forty", "fifty", "hundred", "thousand", "million", "billion",
];

const TITLES: &[&str] = &[
    "mr", "mrs", "ms", "dr", "doctor", "president", "king", "queen", "prince", "princess", "saint",
    "st", "sir", "lord", "lady", "pope", "general", "captain", "professor", "senator", "governor",
    "emperor", "duke", "bishop",
];

const LOCATION_ORG_WORDS: &[&str] = &[
    "university", "college", "institute", "school", "academy", "company", "corporation", "corp",
    "inc", "ltd", "party", "river", "mountain", "mountains", "lake", "sea", "ocean", "island",
    "islands", "city", "county", "state", "states", "kingdom", "republic", "empire", "church",
    "museum", "council", "committee", "association", "society", "league", "bank", "street",
    "avenue", "park", "valley", "bay", "duchy", "province", "army", "navy", "court", "parliament",
    "congress", "department", "ministry", "agency", "hospital", "airport", "station", "bridge",
    "palace", "castle", "cathedral", "temple", "foundation", "union", "club", "stadium", "bowl",
    "nations", "federation", "commission", "office", "house", "square", "desert", "forest",
];

const PLACES: &[&str] = &[
    "america", "england", "britain", "france", "germany", "italy", "spain", "portugal", "poland",
    "russia", "china", "japan", "india", "canada", "mexico", "brazil", "egypt", "greece", "turkey",
    "israel", "ireland", "scotland", "wales", "australia", "europe", "asia", "africa", "london",
    "paris", "berlin", "rome", "warsaw", "moscow", "beijing", "tokyo", "chicago", "boston",
    "california", "texas", "florida", "york", "washington", "vienna", "madrid", "denver",
    "seattle", "houston", "atlanta", "miami", "dublin", "athens", "cairo", "delhi", "sydney",
    "toronto", "geneva", "amsterdam", "prague", "budapest", "lisbon", "oxford", "cambridge",
    "harvard", "yale", "stanford", "princeton", "google", "microsoft", "apple", "ibm", "nasa",
    "nfl", "fifa", "bbc", "cbs", "nbc", "abc", "fox", "espn", "unesco", "nato",
];

const FIRST_NAMES: &[&str] = &[
    "jack", "john", "james", "mary", "elizabeth", "william", "george", "charles", "henry",
    "thomas", "robert", "michael", "david", "richard", "joseph", "peter", "paul", "anne", "anna",
    "sarah", "emma", "frederick", "edward", "martin", "chopin", "napoleon", "beyonce", "luther",
];

/// Capitalized words that are not names on their own.
const STOP_CAPS: &[&str] = &[
    "the", "a", "an", "in", "on", "at", "of", "for", "to", "from", "by", "with", "and", "or",
    "but", "what", "who", "whom", "whose", "which", "when", "where", "why", "how", "is", "are",
    "was", "were", "do", "does", "did", "has", "have", "had", "can", "could", "will", "would",
    "should", "may", "might", "must", "this", "that", "these", "those", "it", "its", "he", "she",
    "they", "we", "i", "you", "his", "her", "their", "our", "my", "your", "after", "before",
    "during", "since", "as", "if", "while", "although", "however", "also", "then", "there",
    "here", "some", "many", "most", "all", "each", "both", "other", "another", "one", "not",
    "january", "february", "march", "april", "june", "july", "august", "september", "october",
    "november", "december", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
    "sunday", "into", "name", "according", "besides", "despite", "unlike", "like",
];

const CONNECTORS: &[&str] = &["of", "the", "de", "von", "van", "del"];

fn is_capitalized(w: &str) -> bool {
    w.chars().next().is_some_and(char::is_uppercase)
}

fn is_number(w: &str) -> bool {
    let lower = w.to_lowercase();
    if lower.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        let digits_end = lower.trim_start_matches(|c: char| c.is_ascii_digit() || c == ',' || c == '.');
        return digits_end.is_empty() || ["st", "nd", "rd", "th", "s"].contains(&digits_end);
    }
    ORDINAL_WORDS.contains(&lower.as_str()) || CARDINAL_WORDS.contains(&lower.as_str())
}

fn classify(span: &[&Word<'_>]) -> Option<EntityGroup> {
    let lower: Vec<String> = span.iter().map(|w| w.text.to_lowercase()).collect();
    if lower.iter().any(|w| LOCATION_ORG_WORDS.contains(&w.as_str()) || PLACES.contains(&w.as_str())) {
        return Some(EntityGroup::LocationOrg);
    }
    if TITLES.contains(&lower[0].as_str()) && span.len() > 1 {
        return Some(EntityGroup::Person);
    }
    if lower.iter().any(|w| FIRST_NAMES.contains(&w.as_str())) {
        return Some(EntityGroup::Person);
    }
    if span.len() >= 2 {
        return Some(EntityGroup::Person);
    }
    None
}

fn scan(text: &str, source: MentionSource, inv: &mut EntityInventory) {
    let ws = words(text);
    let mut i = 0;
    while i < ws.len() {
        let w = &ws[i];
        if is_number(w.text) {
            inv.add(EntityGroup::Number, w.text, source);
            i += 1;
            continue;
        }
        let starts = is_capitalized(w.text) && !STOP_CAPS.contains(&w.text.to_lowercase().as_str());
        if !starts {
            i += 1;
            continue;
        }
        // Extend over capitalized words, allowing lowercase connectors between them.
        let mut span = vec![w];
        let mut j = i + 1;
        while j < ws.len() {
            let t = ws[j].text;
            let adjacent = text[ws[j - 1].span.end..ws[j].span.start].trim().is_empty();
            if !adjacent {
                break;
            }
            let capitalized = is_capitalized(t) && !STOP_CAPS.contains(&t.to_lowercase().as_str());
            let connector = CONNECTORS.contains(&t)
                && ws.get(j + 1).is_some_and(|n| {
                    is_capitalized(n.text) && text[ws[j].span.end..n.span.start].trim().is_empty()
                });
            if capitalized || connector {
                span.push(&ws[j]);
                j += 1;
            } else {
                break;
            }
        }
        if let Some(group) = classify(&span) {
            let surface = &text[span[0].span.start..span[span.len() - 1].span.end];
            inv.add(group, surface, source);
        }
        i = j;
    }
}

/// Rule-based entity inventory of the question and its context.
///
/// When `annotations` is non-empty it replaces the heuristics; mentions not
/// found in either text are ignored.
pub fn extract_entities(question: &str, context: &str, annotations: &[EntityAnnotation]) -> EntityInventory {
    let mut inv = EntityInventory::default();
    if !annotations.is_empty() {
        for a in annotations {
            if question.contains(&a.text) {
                inv.add(a.group, &a.text, MentionSource::Question);
            }
        }
        for a in annotations {
            if !question.contains(&a.text) && context.contains(&a.text) {
                inv.add(a.group, &a.text, MentionSource::Context);
            }
        }
        return inv;
    }
    scan(question, MentionSource::Question, &mut inv);
    scan(context, MentionSource::Context, &mut inv);
    inv
}

/// Replaces one question entity with a different entity of the same group.
pub fn entity_swap(question: &str, inventory: &EntityInventory, seed: u64) -> Result<Perturbation> {
    let mut options: Vec<(EntityGroup, &EntityMention)> = Vec::new();
    for (&group, mentions) in &inventory.groups {
        if mentions.len() < 2 {
            continue;
        }
        for m in mentions {
            if m.source == MentionSource::Question && question.contains(&m.surface) {
                options.push((group, m));
            }
        }
    }
    let mut rng = rng_for(seed, "entity-swap");
    let &(group, target) = options
        .choose(&mut rng)
        .ok_or(Error::NotApplicable("no swappable entity"))?;
    let replacements: Vec<&EntityMention> = inventory
        .group(group)
        .iter()
        .filter(|m| !m.surface.eq_ignore_ascii_case(&target.surface))
        .collect();
    let replacement = replacements
        .choose(&mut rng)
        .ok_or(Error::NotApplicable("no swappable entity"))?;
    let start = question.find(&target.surface).expect("checked above");
    Ok(Perturbation::replace(
        PerturbationKind::EntitySwap,
        question,
        start..start + target.surface.len(),
        &replacement.surface,
        seed,
    ))
}
