use rand::seq::SliceRandom;
use rand::Rng;

use super::{match_case, words, Perturbation, PerturbationKind};
use crate::error::{Error, Result};
use crate::seeding::rng_for;

/// Auxiliary and modal verbs, with their `n't` contraction where one is standard.
const AUXILIARIES: &[(&str, Option<&str>)] = &[
    ("is", Some("isn't")),
    ("are", Some("aren't")),
    ("was", Some("wasn't")),
    ("were", Some("weren't")),
    ("do", Some("don't")),
    ("does", Some("doesn't")),
    ("did", Some("didn't")),
    ("has", Some("hasn't")),
    ("have", Some("haven't")),
    ("had", Some("hadn't")),
    ("can", Some("can't")),
    ("could", Some("couldn't")),
    ("will", Some("won't")),
    ("would", Some("wouldn't")),
    ("should", Some("shouldn't")),
    ("may", None),
    ("might", None),
    ("must", Some("mustn't")),
];

const WH_WORDS: &[&str] = &["what", "who", "which", "whose"];

fn is_negated(word: &str) -> bool {
    let w = word.to_lowercase().replace('’', "'");
    w == "not" || w == "never" || w.ends_with("n't")
}

/// Base form of a third-person singular verb.
fn base_form(verb: &str) -> Option<String> {
    let v = verb.to_lowercase();
    if v.len() < 4 || !v.ends_with('s') || v.ends_with("ss") || v.ends_with("us") || v.ends_with("is") {
        return None;
    }
    if let Some(stem) = v.strip_suffix("ies") {
        return Some(format!("{stem}y"));
    }
    for suffix in ["ches", "shes", "sses", "xes", "zes", "oes"] {
        if v.ends_with(suffix) {
            return Some(v[..v.len() - 2].to_string());
        }
    }
    Some(v[..v.len() - 1].to_string())
}

/// Negates one auxiliary or modal verb, or uses do-support on a present
/// tense verb right after a question word.
pub fn sentence_negation(question: &str, seed: u64) -> Result<Perturbation> {
    let ws = words(question);
    if ws.iter().any(|w| is_negated(w.text)) {
        return Err(Error::NotApplicable("question is already negated"));
    }
    let mut rng = rng_for(seed, "sentence-negation");
    let auxes: Vec<(usize, Option<&str>)> = ws
        .iter()
        .enumerate()
        .filter_map(|(i, w)| {
            let lower = w.text.to_lowercase();
            AUXILIARIES
                .iter()
                .find(|(a, _)| *a == lower)
                .map(|&(_, contraction)| (i, contraction))
        })
        .collect();
    let contract = rng.gen_bool(0.5);

    if let Some(&(i, contraction)) = auxes.choose(&mut rng) {
        let w = &ws[i];
        let replacement = match (contract, contraction) {
            (true, Some(c)) => match_case(c, w.text),
            _ => format!("{} not", w.text),
        };
        return Ok(Perturbation::replace(
            PerturbationKind::SentenceNegation,
            question,
            w.span.clone(),
            &replacement,
            seed,
        ));
    }

    // Do-support: "What controls X" -> "What doesn't control X".
    for i in 1..ws.len().min(3) {
        if !WH_WORDS.contains(&ws[i - 1].text.to_lowercase().as_str()) {
            continue;
        }
        if let Some(base) = base_form(ws[i].text) {
            let aux = if contract { "doesn't" } else { "does not" };
            let replacement = format!("{} {base}", match_case(aux, ws[i].text));
            return Ok(Perturbation::replace(
                PerturbationKind::SentenceNegation,
                question,
                ws[i].span.clone(),
                &replacement,
                seed,
            ));
        }
    }
    Err(Error::NotApplicable("no auxiliary or modal verb"))
}
