#![allow(dead_code)]

use std::path::PathBuf;

use qrelscore::dataset::{references_as_candidates, load_dataset, DatasetFormat, EvalRecord};
use qrelscore::{CausalLm, MaskedLm, Scalar, Scorer};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_mlm<F: Scalar>() -> MaskedLm<F> {
    let d = fixtures().join("mlm");
    MaskedLm::load(&d, d.join("tokenizer.json")).expect("fixture masked LM")
}

pub fn fixture_clm<F: Scalar>() -> CausalLm<F> {
    let d = fixtures().join("clm");
    CausalLm::load(&d, d.join("tokenizer.json")).expect("fixture causal LM")
}

pub fn fixture_scorer<F: Scalar>() -> Scorer<F> {
    Scorer::new(Some(fixture_mlm()), Some(fixture_clm()))
}

/// SQuAD-format slice with the gold question as candidate.
pub fn squad_slice() -> Vec<EvalRecord> {
    let mut r = load_dataset(fixtures().join("squad_slice.json"), DatasetFormat::SquadJson).unwrap();
    references_as_candidates(&mut r);
    r
}
