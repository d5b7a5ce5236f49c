use rand::seq::SliceRandom;

use super::{match_case, words, Perturbation, PerturbationKind, Word};
use crate::error::{Error, Result};
use crate::seeding::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Subject,
    Object,
    Determiner,
    Possessive,
    Reflexive,
}

const SUBJECT: &[&str] = &["i", "you", "he", "she", "we", "they"];
const OBJECT: &[&str] = &["me", "you", "him", "her", "us", "them"];
const DETERMINER: &[&str] = &["my", "your", "his", "her", "our", "their"];
const POSSESSIVE: &[&str] = &["mine", "yours", "his", "hers", "ours", "theirs"];
const REFLEXIVE: &[&str] = &["myself", "yourself", "himself", "herself", "ourselves", "themselves"];

fn members(role: Role) -> &'static [&'static str] {
    match role {
        Role::Subject => SUBJECT,
        Role::Object => OBJECT,
        Role::Determiner => DETERMINER,
        Role::Possessive => POSSESSIVE,
        Role::Reflexive => REFLEXIVE,
    }
}

/// Words that start a clause and so are usually followed by a subject.
const CLAUSE_OPENERS: &[&str] = &[
    "what", "who", "whom", "which", "when", "where", "why", "how", "did", "do", "does", "is", "are",
    "was", "were", "can", "could", "will", "would", "should", "may", "might", "must", "has",
    "have", "had", "that", "if",
];

/// Words after which a following pronoun-like `her`/`his` cannot be a determiner.
const NON_NOUN_FOLLOWERS: &[&str] = &[
    "in", "on", "at", "to", "for", "from", "with", "by", "of", "about", "after", "before", "and",
    "or", "but", "than", "as", "the", "a", "an", "when", "while", "if", "is", "was",
];

fn role_of(words: &[Word<'_>], i: usize) -> Option<Role> {
    let w = words[i].text.to_lowercase();
    let next = words.get(i + 1).map(|w| w.text.to_lowercase());
    let prev = i.checked_sub(1).map(|p| words[p].text.to_lowercase());
    let followed_by_noun = next
        .as_deref()
        .is_some_and(|n| !NON_NOUN_FOLLOWERS.contains(&n));
    match w.as_str() {
        "her" => Some(if followed_by_noun { Role::Determiner } else { Role::Object }),
        "his" => Some(if followed_by_noun { Role::Determiner } else { Role::Possessive }),
        "you" => {
            let opener = prev.as_deref().is_none_or(|p| CLAUSE_OPENERS.contains(&p));
            Some(if opener && next.is_some() { Role::Subject } else { Role::Object })
        }
        other => [Role::Subject, Role::Object, Role::Determiner, Role::Possessive, Role::Reflexive]
            .into_iter()
            .find(|&r| members(r).contains(&other)),
    }
}

/// Replaces one person pronoun with another of the same syntactic role.
pub fn pronoun_swap(question: &str, seed: u64) -> Result<Perturbation> {
    let ws = words(question);
    let found: Vec<(usize, Role)> = (0..ws.len()).filter_map(|i| role_of(&ws, i).map(|r| (i, r))).collect();
    let mut rng = rng_for(seed, "pronoun-swap");
    let &(i, role) = found
        .choose(&mut rng)
        .ok_or(Error::NotApplicable("no person pronoun in question"))?;
    let word = &ws[i];
    let lower = word.text.to_lowercase();
    let options: Vec<&str> = members(role).iter().copied().filter(|&p| p != lower).collect();
    let replacement = *options.choose(&mut rng).expect("every role has several members");

    let at_start = i == 0;
    let text = if replacement == "i" {
        "I".to_string()
    } else if lower == "i" {
        if at_start {
            match_case(replacement, "I")
        } else {
            replacement.to_string()
        }
    } else {
        match_case(replacement, word.text)
    };
    Ok(Perturbation::replace(
        PerturbationKind::PronounSwap,
        question,
        word.span.clone(),
        &text,
        seed,
    ))
}
