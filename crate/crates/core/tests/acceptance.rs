//! Exit criteria, one PASS/FAIL line each.
//!
//! Criteria that need pretrained exports or the SQuAD dev set read them from
//! the environment:
//!
//! * `QRELSCORE_MLM_MODEL`, `QRELSCORE_MLM_TOKENIZER` (BERT-base export)
//! * `QRELSCORE_CLM_MODEL`, `QRELSCORE_CLM_TOKENIZER` (GPT-2 export)
//! * `QRELSCORE_SQUAD_DEV` (SQuAD v1.1 dev JSON)
//!
//! Without them those criteria report `FAIL (blocked)` and do not abort the
//! run; every other failure makes the target exit non-zero.

mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{fixture_clm, fixture_mlm, fixture_scorer, fixtures, squad_slice};
use qrelscore::adversarial::{
    build_adversarial_set, extract_entities, pronoun_swap, sentence_negation, AdversarialAnchor, Label,
    PerturbationKind, SetCounts,
};
use qrelscore::analysis::{auc_statistic, kendall, pearson, roc_auc, spearman};
use qrelscore::baselines::{estimate_baselines, PairSource};
use qrelscore::dataset::{load_dataset, references_as_candidates, DatasetFormat, EvalRecord};
use qrelscore::relevance::{gain, harmonic, power_mean, rescale, ConfidencePair, GainMode, PromptLayout};
use qrelscore::variants::emd_aggregate;
use qrelscore::{variant_config, Aggregation, CausalLm, LrmConfig, MaskedLm, Scorer, VariantSpec, VariantTag};

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

type Criterion = fn() -> Outcome;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn env_path(key: &str) -> Option<PathBuf> {
    std::env::var_os(key).map(PathBuf::from).filter(|p| p.exists())
}

fn pretrained_scorer() -> Result<Scorer<f32>, String> {
    let keys = [
        "QRELSCORE_MLM_MODEL",
        "QRELSCORE_MLM_TOKENIZER",
        "QRELSCORE_CLM_MODEL",
        "QRELSCORE_CLM_TOKENIZER",
    ];
    let paths: Vec<Option<PathBuf>> = keys.iter().map(|k| env_path(k)).collect();
    let missing: Vec<&str> = keys.iter().zip(&paths).filter(|(_, p)| p.is_none()).map(|(k, _)| *k).collect();
    if !missing.is_empty() {
        return Err(format!("pretrained exports not available (unset: {})", missing.join(", ")));
    }
    let p = |i: usize| paths[i].clone().unwrap();
    let mlm = MaskedLm::load(p(0), p(1)).map_err(|e| e.to_string())?;
    let clm = CausalLm::load(p(2), p(3)).map_err(|e| e.to_string())?;
    Ok(Scorer::new(Some(mlm), Some(clm)))
}

fn squad_dev() -> Result<Vec<EvalRecord>, String> {
    let path = env_path("QRELSCORE_SQUAD_DEV").ok_or("SQuAD dev set not available (unset: QRELSCORE_SQUAD_DEV)")?;
    let mut r = load_dataset(path, DatasetFormat::SquadJson).map_err(|e| e.to_string())?;
    references_as_candidates(&mut r);
    Ok(r)
}

fn with_baselines(scorer: &Scorer<f32>, records: &[EvalRecord], tag: VariantTag) -> Result<VariantSpec<f32>, String> {
    let spec = variant_config::<f32>(tag, scorer.num_layers().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let rows: Vec<PairSource<'_>> = records
        .iter()
        .map(|r| PairSource {
            candidate: r.candidate.as_deref().unwrap(),
            context: &r.context,
        })
        .collect();
    let n = rows.len().min(1000);
    let stats = estimate_baselines(scorer, &rows, n, 0, "acceptance", std::slice::from_ref(&spec))
        .map_err(|e| e.to_string())?;
    Ok(stats[0].apply(spec))
}

// ---------------------------------------------------------------------------

const JACK_CONTEXT: &str =
    "Jack drove his car to the bazaar to purchase milk and honey for his large family.";
const JACK_REFERENCE: &str = "Where did Jack buy his milk and honey?";

fn perturbation_ordering() -> Outcome {
    let started = Instant::now();
    // The rule-based generators must reproduce two of the three variants.
    let negated = sentence_negation(JACK_REFERENCE, 0).map(|p| p.transformed);
    let pronoun_ok = (0..64).any(|s| {
        pronoun_swap(JACK_REFERENCE, s).is_ok_and(|p| p.transformed == "Where did Jack buy your milk and honey?")
    });
    let negation_ok = (0..64).any(|s| {
        sentence_negation(JACK_REFERENCE, s).is_ok_and(|p| p.transformed == "Where didn't Jack buy his milk and honey?")
    });
    if !(pronoun_ok && negation_ok && negated.is_ok()) {
        return Outcome::Fail("generators do not produce the reference perturbations".into());
    }
    let scorer = match pretrained_scorer() {
        Ok(s) => s,
        Err(e) => return Outcome::Blocked(e),
    };
    let cfg = LrmConfig::<f32>::all_layers(scorer.num_layers().unwrap());
    let score = |q: &str| scorer.lrm_score(q, JACK_CONTEXT, &cfg).map(|s| s.0);
    let questions = [
        JACK_REFERENCE,
        "Where did Jack buy his car?",
        "Where did Jack buy your milk and honey?",
        "Where didn't Jack buy his milk and honey?",
    ];
    let scores: Result<Vec<f32>, _> = questions.iter().map(|q| score(q)).collect();
    let scores = match scores {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let elapsed = started.elapsed();
    check(
        scores[1..].iter().all(|&s| scores[0] > s) && elapsed < Duration::from_secs(30),
        format!("reference {:.4} vs swap/pronoun/negation {:.4?} in {elapsed:.1?}", scores[0], &scores[1..]),
    )
}

fn common_sense_ranking() -> Outcome {
    let started = Instant::now();
    let scorer = match pretrained_scorer() {
        Ok(s) => s,
        Err(e) => return Outcome::Blocked(e),
    };
    let baseline_rows = squad_dev().unwrap_or_else(|_| squad_slice());
    let spec = match with_baselines(&scorer, &baseline_rows[..baseline_rows.len().min(200)], VariantTag::Full) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e),
    };
    let context = squad_slice()
        .into_iter()
        .find(|r| r.context.contains("Common Sense was published"))
        .map(|r| r.context)
        .expect("slice holds the Common Sense paragraph");
    let qs = [
        "when was Common Sense first published?",
        "who was Common Sense published for the first time?",
        "in what year did Common Sense begin publication?",
        "in what year did the student liberal newspaper begin publication?",
        "when did the observer begin to show a conservative bias?",
    ];
    let scores: Vec<f32> = match qs.iter().map(|q| scorer.score(q, &context, &spec).map(|s| s.combined)).collect() {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let elapsed = started.elapsed();
    let ok = scores[0] > scores[1] && scores[2..].iter().all(|&s| s > scores[1]);
    check(
        ok && elapsed < Duration::from_secs(60),
        format!("Q1..Q5 = {scores:.4?} in {elapsed:.1?}"),
    )
}

fn formula_oracles() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut worst = 0.0f64;
    let mut note = |got: f64, want: f64| worst = worst.max((got - want).abs());
    // Harmonic mean against 2lg/(l+g).
    for &(l, g) in &[(0.5, 0.25), (0.4, 0.4), (0.0, 1.0), (0.9, 0.1), (0.123, 0.987)] {
        let want: f64 = if l + g == 0.0 { 0.0 } else { 2.0 * l * g / (l + g) };
        note(harmonic(l, g), want);
    }
    note(harmonic(0.5, 0.25), 1.0 / 3.0);
    // Power mean against ((1/L) sum v^p)^(1/p).
    let values = [0.1, 0.9, 0.35, 0.72, 0.5];
    for p in [1.0f64, 2.0, 3.0] {
        let want = (values.iter().map(|v: &f64| v.powf(p)).sum::<f64>() / values.len() as f64).powf(1.0 / p);
        note(power_mean(&values, p).unwrap(), want);
    }
    note(power_mean(&[0.1, 0.9], 2.0).unwrap(), 0.640_312_423_743_284_9);
    note(power_mean(&[0.2, 0.4], 1.0).unwrap(), 0.3);
    // Gain ratio max((prompt - base) / |base|, 0).
    for &(b, pr) in &[(-100.0, -90.0), (-100.0, -100.0), (-50.0, -60.0), (-12.5, -3.25)] {
        let pair = ConfidencePair {
            conf_base: b,
            conf_prompt: pr,
            n_context_tokens: 3,
        };
        let want: f64 = ((pr - b) / f64::abs(b)).max(0.0);
        note(gain(&pair, GainMode::Ratio).unwrap(), want);
    }
    // Rescaling anchors.
    for b in [0.0, 0.3, 0.83] {
        note(rescale(b, b), 0.0);
        note(rescale(1.0, b), 1.0);
        note(rescale((1.0 + b) / 2.0, b), 0.5);
    }
    check(worst <= TOL, format!("max deviation {worst:.2e} (tolerance {TOL:e})"))
}

type Q = Ratio<i64>;

/// Minimum transport cost over every vertex of the uniform-marginal
/// transportation polytope, found by enumerating spanning-tree bases.
fn vertex_enumeration_cost(cost: &[Q], rows: usize, cols: usize) -> Q {
    let cells = rows * cols;
    let basis = rows + cols - 1;
    let mut best: Option<Q> = None;
    for mask in 0u32..(1 << cells) {
        if mask.count_ones() as usize != basis {
            continue;
        }
        let chosen: Vec<usize> = (0..cells).filter(|k| mask >> k & 1 == 1).collect();
        // Solve the tree by peeling leaves.
        let mut row_left: Vec<Q> = vec![Q::new(1, rows as i64); rows];
        let mut col_left: Vec<Q> = vec![Q::new(1, cols as i64); cols];
        let mut flow: Vec<Option<Q>> = vec![None; cells];
        let mut open = chosen.clone();
        let mut progress = true;
        while !open.is_empty() && progress {
            progress = false;
            for idx in 0..open.len() {
                let k = open[idx];
                let (i, j) = (k / cols, k % cols);
                let row_deg = open.iter().filter(|&&o| o / cols == i).count();
                let col_deg = open.iter().filter(|&&o| o % cols == j).count();
                if row_deg == 1 || col_deg == 1 {
                    let v = if row_deg == 1 { row_left[i] } else { col_left[j] };
                    flow[k] = Some(v);
                    row_left[i] -= v;
                    col_left[j] -= v;
                    open.remove(idx);
                    progress = true;
                    break;
                }
            }
        }
        if !open.is_empty() {
            continue; // contains a cycle
        }
        let zero = Q::from_integer(0);
        if row_left.iter().chain(&col_left).any(|&r| r != zero) {
            continue;
        }
        if chosen.iter().any(|&k| flow[k].unwrap() < zero) {
            continue;
        }
        let c: Q = chosen.iter().map(|&k| flow[k].unwrap() * cost[k]).sum();
        if best.is_none_or(|b| c < b) {
            best = Some(c);
        }
    }
    best.expect("the polytope has a vertex")
}

fn transport_oracle() -> Outcome {
    const TOL: f64 = 1e-6;
    let grid = [Q::new(0, 1), Q::new(1, 4), Q::new(1, 3), Q::new(1, 2), Q::new(2, 3), Q::new(1, 1)];
    let mut worst = 0.0f64;
    let mut instances = 0usize;
    for (rows, cols) in [(2usize, 2usize), (2, 3)] {
        let cells = rows * cols;
        let total = grid.len().pow(cells as u32);
        for code in 0..total {
            let mut c = code;
            let cost: Vec<Q> = (0..cells)
                .map(|_| {
                    let v = grid[c % grid.len()];
                    c /= grid.len();
                    v
                })
                .collect();
            let to_f = |q: &Q| *q.numer() as f64 / *q.denom() as f64;
            let cost_f = ndarray::Array2::from_shape_fn((rows, cols), |(i, j)| to_f(&cost[i * cols + j]));
            let sim = cost_f.mapv(|c| 1.0 - c);
            let got = match emd_aggregate(&sim, &cost_f) {
                Ok(v) => v,
                Err(e) => return Outcome::Fail(e.to_string()),
            };
            let want = 1.0 - to_f(&vertex_enumeration_cost(&cost, rows, cols));
            worst = worst.max((got - want).abs());
            instances += 1;
        }
    }
    check(worst <= TOL, format!("{instances} instances, max deviation {worst:.2e}"))
}

fn brute_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn brute_kendall(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut s, mut n0, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            n0 += 1;
            let (a, b) = ((x[i] - x[j]).signum(), (y[i] - y[j]).signum());
            if x[i] == x[j] {
                tx += 1;
            }
            if y[i] == y[j] {
                ty += 1;
            }
            if x[i] != x[j] && y[i] != y[j] {
                s += (a * b) as i64;
            }
        }
    }
    let den = ((n0 - tx) as f64 * (n0 - ty) as f64).sqrt();
    (den > 0.0).then(|| s as f64 / den)
}

fn brute_auc_twice(scores: &[f64], labels: &[bool]) -> Option<u64> {
    let mut twice = 0u64;
    let (mut p, mut n) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li {
            p += 1;
        } else {
            n += 1;
        }
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if !lj {
                twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    (p > 0 && n > 0).then_some(twice)
}

fn statistics_oracles() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for trial in 0..200 {
        let n = rng.gen_range(3..=12);
        // Small integer support forces ties.
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64 * 0.5).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..4) as f64).collect();
        let pairs: [(Option<f64>, Result<f64, _>); 3] = [
            (brute_pearson(&x, &y), pearson(&x, &y)),
            (brute_pearson(&brute_ranks(&x), &brute_ranks(&y)), spearman(&x, &y)),
            (brute_kendall(&x, &y), kendall(&x, &y)),
        ];
        for (k, (want, got)) in pairs.into_iter().enumerate() {
            match (want, got) {
                (Some(w), Ok(g)) => worst = worst.max((w - g).abs()),
                (None, Err(_)) => {}
                (w, g) => failures.push(format!("trial {trial} stat {k}: oracle {w:?} vs {g:?}")),
            }
        }
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        match (brute_auc_twice(&x, &labels), auc_statistic(&x, &labels)) {
            (Some(w), Ok(s)) if s.twice_u == w => {}
            (None, Err(_)) => {}
            (w, g) => failures.push(format!("trial {trial} auc: oracle {w:?} vs {g:?}")),
        }
    }
    // Monotone maps leave rank statistics unchanged.
    for m in 0..100 {
        let n = rng.gen_range(3..=12);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-20..20) as f64 / 4.0).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64).collect();
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let (a, b, c) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..2.0), rng.gen_range(-1.0..1.0));
        let f = |v: f64| match m % 3 {
            0 => a * v + c,
            1 => (b * v).exp() + c,
            _ => a * v * v * v + b * v + c,
        };
        let fx: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        for (name, s0, s1) in [
            ("spearman", spearman(&x, &y).ok(), spearman(&fx, &y).ok()),
            ("kendall", kendall(&x, &y).ok(), kendall(&fx, &y).ok()),
            ("auc", roc_auc(&x, &labels).ok(), roc_auc(&fx, &labels).ok()),
        ] {
            match (s0, s1) {
                (Some(u), Some(v)) if (u - v).abs() <= TOL => {}
                (None, None) => {}
                (u, v) => failures.push(format!("map {m} {name}: {u:?} vs {v:?}")),
            }
        }
    }
    if let Some(f) = failures.first() {
        return Outcome::Fail(format!("{} mismatches, first: {f}", failures.len()));
    }
    check(worst <= TOL, format!("200 vectors + 100 monotone maps, max deviation {worst:.2e}"))
}

fn robustness() -> Outcome {
    let started = Instant::now();
    let scorer = match pretrained_scorer() {
        Ok(s) => s,
        Err(e) => return Outcome::Blocked(e),
    };
    let dev = match squad_dev() {
        Ok(d) => d,
        Err(e) => return Outcome::Blocked(e),
    };
    let mut order: Vec<usize> = (0..dev.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
    let anchors_src: Vec<&EvalRecord> = order.iter().take(200).map(|&i| &dev[i]).collect();
    let baseline_src: Vec<EvalRecord> = anchors_src.iter().map(|r| (*r).clone()).collect();
    let spec = match with_baselines(&scorer, &baseline_src, VariantTag::Full) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e),
    };
    let anchors: Vec<AdversarialAnchor<'_>> = anchors_src
        .iter()
        .map(|r| AdversarialAnchor {
            id: &r.id,
            question: r.references[0].as_str(),
            context: &r.context,
            entities: &r.entities,
        })
        .collect();
    let set = match build_adversarial_set(
        &anchors,
        SetCounts { positives: 200, negatives: 200 },
        &[PerturbationKind::SentenceNegation, PerturbationKind::PronounSwap],
        0,
    ) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let scores: Vec<f32> = match set
        .rows
        .iter()
        .map(|r| scorer.score(&r.question, &r.context, &spec).map(|s| s.combined))
        .collect()
    {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let labels: Vec<bool> = set.rows.iter().map(|r| r.label == Label::Positive).collect();
    let auc = roc_auc(&scores, &labels).unwrap() as f64;
    let (mut applicable, mut directional) = (0, 0);
    for (k, r) in set.rows.iter().enumerate().filter(|(_, r)| r.label == Label::Negative) {
        if let Some(o) = set
            .rows
            .iter()
            .position(|p| p.label == Label::Positive && p.original_id == r.original_id)
        {
            applicable += 1;
            if scores[k] < scores[o] {
                directional += 1;
            }
        }
    }
    let share = directional as f64 / applicable.max(1) as f64;
    let elapsed = started.elapsed();
    check(
        auc >= 0.60 && share >= 0.70 && elapsed < Duration::from_secs(20 * 60),
        format!("AUC {auc:.3}, perturbed < original on {directional}/{applicable} ({share:.2}) in {elapsed:.0?}"),
    )
}

/// Random in-capacity (candidate, context) pairs from the fixture slice.
fn random_samples(n: usize, seed: u64) -> Vec<(String, String)> {
    let records = squad_slice();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let q = &records[rng.gen_range(0..records.len())];
            let c = &records[rng.gen_range(0..records.len())];
            let words: Vec<&str> = c.context.split_whitespace().collect();
            let keep = rng.gen_range(3..=words.len().min(60));
            (q.candidate.clone().unwrap(), words[..keep].join(" "))
        })
        .collect()
}

fn determinism_and_chunking() -> Outcome {
    let scorer = fixture_scorer::<f32>();
    let spec = variant_config::<f32>(VariantTag::Full, 12).unwrap();
    let samples = random_samples(100, 7);
    let run = || -> String {
        use rayon::prelude::*;
        let rows: Vec<String> = samples
            .par_iter()
            .map(|(q, c)| serde_json::to_string(&scorer.score(q, c, &spec).unwrap()).unwrap())
            .collect();
        rows.join("\n")
    };
    if run() != run() {
        return Outcome::Fail("two scoring runs differ".into());
    }
    let records = squad_slice();
    let anchors: Vec<AdversarialAnchor<'_>> = records
        .iter()
        .map(|r| AdversarialAnchor {
            id: &r.id,
            question: r.references[0].as_str(),
            context: &r.context,
            entities: &r.entities,
        })
        .collect();
    let counts = SetCounts { positives: 50, negatives: 50 };
    let adv = |s| serde_json::to_string(&build_adversarial_set(&anchors, counts, &PerturbationKind::ALL, s).unwrap().rows).unwrap();
    if adv(5) != adv(5) {
        return Outcome::Fail("two adversarial builds differ".into());
    }

    // Single-chunk invariance.
    let lrm = LrmConfig::<f32>::all_layers(12);
    let grg = qrelscore::GrgConfig::<f32>::default();
    for (q, c) in &samples {
        let chunked = scorer.lrm_score(q, c, &lrm).unwrap().0;
        let direct = scorer.lrm_raw_unchunked(q, c, &lrm).unwrap();
        let g_chunked = scorer.grg_evidence(q, c, " ").unwrap().chunk_raw(GainMode::Ratio).unwrap();
        let g_direct = gain(&scorer.confidence_pair_unchunked(q, c, &grg).unwrap(), GainMode::Ratio).unwrap();
        if chunked.to_bits() != direct.to_bits() || g_chunked != vec![g_direct] {
            return Outcome::Fail(format!("chunked and direct scores differ for {q:?}"));
        }
    }

    // Prompted and unprompted runs see the same context ids.
    let clm = scorer.clm().unwrap();
    let sep = clm.encode(" ").unwrap();
    for (q, c) in &random_samples(100, 8) {
        let cand = clm.encode(q).unwrap();
        let ctx = clm.encode(c).unwrap();
        let layout = PromptLayout::new(&cand, &sep, &ctx);
        let prompted = clm.clm_logprobs(&layout.ids).unwrap();
        if prompted.token_ids[layout.context.clone()] != ctx[..] {
            return Outcome::Fail(format!("context ids shifted under prompt {q:?}"));
        }
    }
    Outcome::Pass("byte-identical reruns; 100 single-chunk and 100 alignment samples agree".into())
}

fn baseline_separation() -> Outcome {
    let scorer = Scorer::<f32>::new(Some(fixture_mlm()), None);
    let records: Vec<EvalRecord> = squad_slice().into_iter().take(100).collect();
    let spec = variant_config::<f32>(VariantTag::M1, 12).unwrap();
    let rows: Vec<PairSource<'_>> = records
        .iter()
        .map(|r| PairSource {
            candidate: r.candidate.as_deref().unwrap(),
            context: &r.context,
        })
        .collect();
    let estimate = || estimate_baselines(&scorer, &rows, 100, 42, "slice", std::slice::from_ref(&spec)).unwrap();
    let (a, b) = (estimate(), estimate());
    if a != b {
        return Outcome::Fail("baseline estimation is not reproducible".into());
    }
    let b_lrm = a[0].b_lrm;
    let matched: Vec<f32> = rows
        .iter()
        .map(|r| scorer.score(r.candidate, r.context, &spec).unwrap().lrm_raw.unwrap())
        .collect();
    let mean = matched.iter().sum::<f32>() / matched.len() as f32;
    check(mean > b_lrm, format!("matched mean raw {mean:.5} vs b_lrm {b_lrm:.5} (fixture models)"))
}

fn variant_grid() -> Outcome {
    let scorer = fixture_scorer::<f32>();
    let tags = [VariantTag::M1, VariantTag::M6, VariantTag::M8, VariantTag::M9];
    let specs: Vec<VariantSpec<f32>> = tags.iter().map(|&t| variant_config(t, 12).unwrap()).collect();
    let (mut dominated, mut same_support, mut nonzero) = (0, 0, 0);
    // Half matched pairs from the slice, half random pairs.
    let mut samples: Vec<(String, String)> = squad_slice()
        .into_iter()
        .take(25)
        .map(|r| (r.candidate.unwrap(), r.context))
        .collect();
    samples.extend(random_samples(50 - samples.len(), 9));
    let layer_cfg = |l: usize, agg| LrmConfig::<f32> {
        layers: vec![l],
        p: 1.0,
        agg,
        baseline: 0.0,
    };
    for (q, c) in &samples {
        let ev = scorer.lrm_evidence(q, c).unwrap();
        let every_layer = (0..12).all(|l| {
            ev.chunks.iter().all(|ch| {
                ch.raw(&layer_cfg(l, Aggregation::Avg)).unwrap() <= ch.raw(&layer_cfg(l, Aggregation::Max)).unwrap()
            })
        });
        let s = scorer.score_variants(q, c, &specs).unwrap();
        if every_layer && s[1].lrm_raw.unwrap() <= s[0].lrm_raw.unwrap() {
            dominated += 1;
        }
        let (m8, m9) = (s[2].grg_raw.unwrap(), s[3].grg_raw.unwrap());
        if (m8 == 0.0) == (m9 == 0.0) {
            same_support += 1;
        }
        if m8 > 0.0 {
            nonzero += 1;
        }
    }
    check(
        dominated == 50 && same_support == 50,
        format!("M6<=M1 at every layer on {dominated}/50, M8/M9 support agrees on {same_support}/50 ({nonzero} nonzero)"),
    )
}

fn parity_fixture() -> Outcome {
    #[derive(serde::Deserialize)]
    struct Fixture {
        candidate: String,
        context: String,
        mlm: Mlm,
        clm: Clm,
    }
    #[derive(serde::Deserialize)]
    struct Mlm {
        full_sequence: Vec<u32>,
        query_rows: usize,
        attentions: Vec<Vec<Vec<Vec<f64>>>>,
        hidden_states: Vec<Vec<Vec<f64>>>,
    }
    #[derive(serde::Deserialize)]
    struct Clm {
        token_ids: Vec<u32>,
        logprobs: Vec<f64>,
    }
    let fx: Fixture =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("parity.json")).unwrap()).unwrap();
    let mlm = fixture_mlm::<f32>();
    let pair = mlm.tokenize_pair(&fx.candidate, &fx.context).unwrap();
    if pair.full_sequence != fx.mlm.full_sequence {
        return Outcome::Fail("token ids differ".into());
    }
    let acts = mlm.forward(&pair).unwrap();
    let mut worst = 0.0f64;
    for (l, heads) in fx.mlm.attentions.iter().enumerate() {
        for (h, rows) in heads.iter().enumerate() {
            for (q, row) in rows.iter().enumerate().take(fx.mlm.query_rows) {
                for (k, &v) in row.iter().enumerate() {
                    worst = worst.max((acts.attentions[[l, h, q, k]] as f64 - v).abs());
                }
            }
        }
    }
    for (l, rows) in fx.mlm.hidden_states.iter().enumerate() {
        for (t, row) in rows.iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                worst = worst.max((acts.embeddings[[l, t, d]] as f64 - v).abs());
            }
        }
    }
    let clm = fixture_clm::<f32>();
    let lp = clm.clm_logprobs(&fx.clm.token_ids).unwrap();
    for (a, b) in lp.logprobs.iter().zip(&fx.clm.logprobs) {
        worst = worst.max((*a as f64 - b).abs());
    }
    check(worst <= 1e-3, format!("max deviation {worst:.2e}"))
}

fn entity_inventory_smoke() -> Outcome {
    // The milk-and-honey entity swap is outside what the heuristic tagger can derive;
    // make sure an annotation reaches the same edit.
    let ann = [
        qrelscore::dataset::EntityAnnotation {
            text: "milk and honey".into(),
            group: qrelscore::adversarial::EntityGroup::LocationOrg,
        },
        qrelscore::dataset::EntityAnnotation {
            text: "car".into(),
            group: qrelscore::adversarial::EntityGroup::LocationOrg,
        },
    ];
    let inv = extract_entities(JACK_REFERENCE, JACK_CONTEXT, &ann);
    let swapped: BTreeSet<String> = (0..16)
        .filter_map(|s| qrelscore::adversarial::entity_swap(JACK_REFERENCE, &inv, s).ok())
        .map(|p| p.transformed)
        .collect();
    check(
        swapped.contains("Where did Jack buy his car?"),
        format!("annotated swaps {swapped:?}"),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("perturbation ordering (Jack/bazaar)", perturbation_ordering),
        ("qualitative ranking (Common Sense)", common_sense_ranking),
        ("formula oracles", formula_oracles),
        ("transport oracle", transport_oracle),
        ("statistics oracles", statistics_oracles),
        ("robustness (desk scale)", robustness),
        ("determinism & chunking", determinism_and_chunking),
        ("baseline separation", baseline_separation),
        ("variant grid", variant_grid),
        ("parity fixture [secondary]", parity_fixture),
    ];
    let mut failed = 0;
    let mut blocked = 0;
    let extra: [(&str, Criterion); 1] = [("annotated entity swap (Jack/bazaar)", entity_inventory_smoke)];
    for (name, f) in criteria.iter().chain(extra.iter()) {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("PASS {name}: {d} [{secs:.1}s]"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1}s]");
            }
            Outcome::Blocked(d) => {
                blocked += 1;
                println!("FAIL {name} (blocked: {d})");
            }
        }
    }
    println!("acceptance: {failed} failed, {blocked} blocked");
    if failed > 0 {
        std::process::exit(1);
    }
}
