use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use qrelscore::adversarial::{build_adversarial_set, AdversarialAnchor, PerturbationKind, SetCounts};
use qrelscore::analysis::{
    auc_report, correlation_report, forward_selection, score_distribution, GroupSummary, ScoreTable,
    SelectionConfig, SelectionReport,
};
use qrelscore::baselines::{
    baselines_json, check_fingerprints, default_n_pairs, find_variant, load_baselines, PairSource,
};
use qrelscore::dataset::{load_predictions, merge_predictions, references_as_candidates};
use qrelscore::scorer::ChunkScores;
use qrelscore::{
    estimate_baselines, load_dataset, variant_config, BaselineStats, CausalLm, DatasetFormat, EvalRecord,
    MaskedLm, Scalar, Scorer, VariantSpec, VariantTag,
};

use crate::config::Common;
use crate::output;

/// Layer count assumed for variant layer sets when no masked LM is loaded.
const DEFAULT_LAYERS: usize = 12;

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Also report Ref-QRelScore against each row's references.
    #[arg(long)]
    pub ref_qrel: bool,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Mismatched pairs to draw [default: min(1000, rows)].
    #[arg(long)]
    pub n_pairs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Positive rows [default: every anchor].
    #[arg(long)]
    pub positives: Option<usize>,
    /// Negative rows [default: every anchor].
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Comma-separated perturbation kinds [default: all].
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Score table (JSON lines or CSV).
    #[arg(long)]
    pub scores: PathBuf,
    /// Rating used for forward selection; repeatable [default: every dimension with enough rows].
    #[arg(long)]
    pub target: Vec<String>,
    /// Rating dimension that groups score distributions [default: relevance when present].
    #[arg(long)]
    pub group_by: Option<String>,
    /// Metric whose ranking is written [default: qrel, else the first metric].
    #[arg(long)]
    pub rank_by: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
}

fn load_records(common: &Common, need_candidates: bool) -> Result<Vec<EvalRecord>> {
    let path = common
        .dataset
        .as_deref()
        .ok_or_else(|| anyhow!("--dataset is required"))?;
    let format: DatasetFormat = common.format.as_deref().unwrap_or("jsonl").parse()?;
    let mut records =
        load_dataset(path, format).with_context(|| format!("loading dataset {}", path.display()))?;
    if let Some(p) = &common.predictions {
        let preds = load_predictions(p).with_context(|| format!("loading predictions {}", p.display()))?;
        let hits = merge_predictions(&mut records, &preds);
        log::info!("merged {hits} predictions");
    }
    if Common::flag(common.candidate_from_reference) {
        references_as_candidates(&mut records);
    }
    if need_candidates {
        let missing: Vec<&str> = records
            .iter()
            .filter(|r| r.candidate.is_none())
            .map(|r| r.id.as_str())
            .take(5)
            .collect();
        if !missing.is_empty() {
            bail!(
                "records without a candidate (first: {}); pass --predictions or --candidate-from-reference",
                missing.join(", ")
            );
        }
    }
    Ok(records)
}

fn parse_tags(s: &str) -> Result<Vec<VariantTag>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(VariantTag::ALL.to_vec());
    }
    s.split(',').map(|t| Ok(t.trim().parse::<VariantTag>()?)).collect()
}

fn load_scorer<F: Scalar>(common: &Common, need_mlm: bool, need_clm: bool) -> Result<Scorer<F>> {
    let mlm = match (&common.mlm_model, need_mlm) {
        (Some(m), true) => {
            let tok = Common::tokenizer_for(m, common.tokenizer_mlm.as_ref());
            Some(MaskedLm::load(m, &tok).with_context(|| {
                format!("loading masked LM {} with tokenizer {}", m.display(), tok.display())
            })?)
        }
        (None, true) => bail!("the requested variant needs a masked LM; pass --mlm-model"),
        _ => None,
    };
    let clm = match (&common.clm_model, need_clm) {
        (Some(m), true) => {
            let tok = Common::tokenizer_for(m, common.tokenizer_clm.as_ref());
            Some(CausalLm::load(m, &tok).with_context(|| {
                format!("loading causal LM {} with tokenizer {}", m.display(), tok.display())
            })?)
        }
        (None, true) => bail!("the requested variant needs a causal LM; pass --clm-model"),
        _ => None,
    };
    Ok(Scorer::new(mlm, clm))
}

fn specs_for<F: Scalar>(scorer: &Scorer<F>, tags: &[VariantTag]) -> Result<Vec<VariantSpec<F>>> {
    let layers = scorer.num_layers().unwrap_or(DEFAULT_LAYERS);
    Ok(tags
        .iter()
        .map(|&t| variant_config(t, layers))
        .collect::<qrelscore::Result<_>>()?)
}

fn needs(tags: &[VariantTag]) -> (bool, bool) {
    let s: Vec<VariantSpec<f64>> = tags
        .iter()
        .map(|&t| variant_config(t, DEFAULT_LAYERS).expect("grid config is valid"))
        .collect();
    (s.iter().any(|v| v.lrm.is_some()), s.iter().any(|v| v.grg.is_some()))
}

fn baselined_specs<F: Scalar>(
    common: &Common,
    scorer: &Scorer<F>,
    tags: &[VariantTag],
) -> Result<Vec<VariantSpec<F>>> {
    let path = match &common.baseline_file {
        Some(p) if p.exists() => p,
        Some(p) => bail!(
            "baseline file {} does not exist; run `qrelscore baseline --output {}` first",
            p.display(),
            p.display()
        ),
        None => bail!(
            "no --baseline-file given; run `qrelscore baseline --output <file>` first to estimate the rescaling baselines"
        ),
    };
    let stats: Vec<BaselineStats<F>> =
        load_baselines(path).with_context(|| format!("loading baselines {}", path.display()))?;
    let mlm_fp = scorer.mlm().ok().map(|m| m.handle().fingerprint.clone());
    let clm_fp = scorer.clm().ok().map(|m| m.handle().fingerprint.clone());
    specs_for(scorer, tags)?
        .into_iter()
        .map(|spec| {
            let s = find_variant(&stats, spec.tag)?;
            check_fingerprints(
                &s,
                mlm_fp.as_ref(),
                clm_fp.as_ref(),
                Common::flag(common.allow_fingerprint_mismatch),
            )?;
            Ok(s.apply(spec))
        })
        .collect()
}

#[derive(Serialize)]
struct ScoreRow<F> {
    id: String,
    lrm_raw: Option<F>,
    lrm: Option<F>,
    grg_raw: Option<F>,
    grg: Option<F>,
    qrel: F,
    #[serde(skip_serializing_if = "Option::is_none")]
    ref_qrel: Option<F>,
    variant: VariantTag,
    chunks: ChunkScores<F>,
}

pub fn score<F: Scalar>(common: &Common, args: &ScoreArgs) -> Result<()> {
    let tag: VariantTag = common.variant().parse()?;
    let records = load_records(common, true)?;
    let (need_mlm, need_clm) = needs(&[tag]);
    // Guard before loading models, which is slow.
    if common.baseline_file.as_ref().is_none_or(|p| !p.exists()) {
        baselined_specs::<F>(common, &Scorer::new(None, None), &[tag])?;
    }
    let scorer = load_scorer::<F>(common, need_mlm, need_clm)?;
    let spec = baselined_specs(common, &scorer, &[tag])?.remove(0);
    let rows: Vec<ScoreRow<F>> = records
        .par_iter()
        .map(|r| {
            let cand = r.candidate.as_deref().expect("checked above");
            let s = scorer
                .score(cand, &r.context, &spec)
                .with_context(|| format!("scoring record {}", r.id))?;
            let ref_qrel = if args.ref_qrel && !r.references.is_empty() {
                Some(scorer.ref_qrel_score(cand, &r.context, &r.references, &spec)?)
            } else {
                None
            };
            Ok(ScoreRow {
                id: r.id.clone(),
                lrm_raw: s.lrm_raw,
                lrm: s.lrm,
                grg_raw: s.grg_raw,
                grg: s.grg,
                qrel: s.combined,
                ref_qrel,
                variant: tag,
                chunks: s.chunk_scores,
            })
        })
        .collect::<Result<_>>()?;
    let head = output::header("score", common)?;
    output::write_jsonl(common.output.as_deref(), &head, &rows)
}

fn dataset_id(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn baseline<F: Scalar>(common: &Common, args: &BaselineArgs) -> Result<()> {
    let requested = common.variant.as_deref().unwrap_or("all");
    let mut tags = parse_tags(requested)?;
    if requested.eq_ignore_ascii_case("all") {
        // Keep the variants the given models support.
        let before = tags.len();
        tags.retain(|&t| {
            let (m, c) = needs(&[t]);
            (!m || common.mlm_model.is_some()) && (!c || common.clm_model.is_some())
        });
        if tags.len() < before {
            log::warn!(
                "estimating {} of {before} variants; the rest need a model that was not given",
                tags.len()
            );
        }
        if tags.is_empty() {
            bail!("no variant can be estimated; pass --mlm-model and/or --clm-model");
        }
    }
    let records = load_records(common, true)?;
    let (need_mlm, need_clm) = needs(&tags);
    let scorer = load_scorer::<F>(common, need_mlm, need_clm)?;
    let specs = specs_for(&scorer, &tags)?;
    let rows: Vec<PairSource<'_>> = records
        .iter()
        .map(|r| PairSource {
            candidate: r.candidate.as_deref().expect("checked above"),
            context: &r.context,
        })
        .collect();
    let n_pairs = args.n_pairs.unwrap_or_else(|| default_n_pairs(records.len()));
    let id = dataset_id(common.dataset.as_deref().expect("dataset loaded"));
    let stats = estimate_baselines(&scorer, &rows, n_pairs, common.seed(), &id, &specs)?;
    let mut w = output::open(common.output.as_deref())?;
    w.write_all(output::header("baseline", common)?.as_bytes())?;
    w.write_all(baselines_json(&stats)?.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn perturb(common: &Common, args: &PerturbArgs) -> Result<()> {
    let records = load_records(common, false)?;
    let questions: Vec<&str> = records
        .iter()
        .map(|r| {
            r.references
                .first()
                .or(r.candidate.as_ref())
                .map(String::as_str)
                .ok_or_else(|| anyhow!("record {} has neither a reference nor a candidate", r.id))
        })
        .collect::<Result<_>>()?;
    let anchors: Vec<AdversarialAnchor<'_>> = records
        .iter()
        .zip(&questions)
        .map(|(r, q)| AdversarialAnchor {
            id: &r.id,
            question: q,
            context: &r.context,
            entities: &r.entities,
        })
        .collect();
    let kinds: Vec<PerturbationKind> = if args.kinds.is_empty() {
        PerturbationKind::ALL.to_vec()
    } else {
        args.kinds.iter().map(|k| k.parse()).collect::<qrelscore::Result<_>>()?
    };
    let counts = SetCounts {
        positives: args.positives.unwrap_or(anchors.len()),
        negatives: args.negatives.unwrap_or(anchors.len()),
    };
    let set = build_adversarial_set(&anchors, counts, &kinds, common.seed())?;
    if set.partial {
        eprintln!("warning: requested counts unreachable; wrote a partial set");
    }
    #[derive(Serialize)]
    struct Echo<'a> {
        #[serde(flatten)]
        common: &'a Common,
        positives: usize,
        negatives: usize,
        kinds: Vec<&'static str>,
    }
    let head = output::header(
        "perturb",
        &Echo {
            common,
            positives: counts.positives,
            negatives: counts.negatives,
            kinds: kinds.iter().map(|k| k.as_str()).collect(),
        },
    )?;
    output::write_jsonl(common.output.as_deref(), &head, &set.rows)
}

pub fn variants<F: Scalar>(common: &Common) -> Result<()> {
    let tags = VariantTag::ALL.to_vec();
    let records = load_records(common, true)?;
    if common.baseline_file.as_ref().is_none_or(|p| !p.exists()) {
        baselined_specs::<F>(common, &Scorer::new(None, None), &tags)?;
    }
    let scorer = load_scorer::<F>(common, true, true)?;
    let specs = baselined_specs(common, &scorer, &tags)?;
    let rows: Vec<Map<String, Value>> = records
        .par_iter()
        .map(|r| {
            let cand = r.candidate.as_deref().expect("checked above");
            let scores = scorer
                .score_variants(cand, &r.context, &specs)
                .with_context(|| format!("scoring record {}", r.id))?;
            let mut row = Map::new();
            row.insert("id".into(), Value::String(r.id.clone()));
            for s in scores {
                row.insert(s.config_tag.as_str().into(), serde_json::to_value(s.combined)?);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let head = output::header("variants", common)?;
    let out = common.output.as_deref();
    if output::is_csv(out) {
        let mut w = output::open(out)?;
        w.write_all(head.as_bytes())?;
        let mut csv = csv::Writer::from_writer(w);
        let cols: Vec<&str> = std::iter::once("id").chain(tags.iter().map(|t| t.as_str())).collect();
        csv.write_record(&cols)?;
        for row in &rows {
            csv.write_record(cols.iter().map(|c| match &row[*c] {
                Value::String(s) => s.clone(),
                v => v.to_string(),
            }))?;
        }
        csv.flush()?;
        Ok(())
    } else {
        output::write_jsonl(out, &head, &rows)
    }
}

#[derive(Serialize)]
struct RankRow {
    rank: usize,
    id: String,
    score: f64,
}

#[derive(Serialize)]
struct SelectionRow<'a> {
    target: &'a str,
    step: usize,
    metric: &'a str,
    votes: usize,
    repeats: usize,
    mean_mse: f64,
    mean_r2: f64,
}

#[derive(Serialize)]
struct Distributions<'a> {
    metric: &'a str,
    group_by: Option<&'a str>,
    groups: Vec<GroupSummary>,
}

pub fn analyze(common: &Common, args: &AnalyzeArgs) -> Result<()> {
    let mut table =
        ScoreTable::load(&args.scores).with_context(|| format!("loading scores {}", args.scores.display()))?;
    if common.dataset.is_some() {
        let records = load_records(common, false)?;
        let hits = table.attach_records(&records)?;
        log::info!("joined ratings for {hits} rows");
    }
    let dir = common
        .output
        .as_deref()
        .ok_or_else(|| anyhow!("analyze writes several reports; pass --output <directory>"))?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    #[derive(Serialize)]
    struct Echo<'a> {
        #[serde(flatten)]
        common: &'a Common,
        scores: &'a Path,
        folds: usize,
        repeats: usize,
    }
    let head = output::header(
        "analyze",
        &Echo {
            common,
            scores: &args.scores,
            folds: args.folds,
            repeats: args.repeats,
        },
    )?;

    let rank_by = match &args.rank_by {
        Some(m) => m.clone(),
        None if table.has_metric("qrel") => "qrel".into(),
        None => table
            .metrics
            .first()
            .cloned()
            .ok_or_else(|| anyhow!("score table has no metric columns"))?,
    };
    if !table.has_metric(&rank_by) {
        bail!("metric {rank_by} not in score table");
    }
    let mut ranked: Vec<(&str, f64)> = table
        .rows
        .iter()
        .map(|r| (r.sample_id.as_str(), r.metrics[&rank_by]))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let ranking: Vec<RankRow> = ranked
        .iter()
        .enumerate()
        .map(|(i, (id, s))| RankRow {
            rank: i + 1,
            id: id.to_string(),
            score: *s,
        })
        .collect();
    output::write_csv(Some(&dir.join("ranking.csv")), &head, &ranking)?;
    println!("ranking by {rank_by}:");
    for r in &ranking {
        println!("  {:>3}  {:<40} {:.6}", r.rank, r.id, r.score);
    }

    let dims = table.dimensions();
    if !dims.is_empty() {
        let corr = correlation_report(&table);
        output::write_csv(Some(&dir.join("correlations.csv")), &head, &corr)?;
        println!("correlations: {} rows", corr.len());
    }

    if table.rows.iter().any(|r| r.label.is_some()) {
        let auc = auc_report(&table)?;
        for a in &auc {
            println!("auc {:<20} {:.4} ({} positive / {} negative)", a.metric, a.auc, a.n_pos, a.n_neg);
        }
        output::write_csv(Some(&dir.join("auc.csv")), &head, &auc)?;
    }

    let targets: Vec<String> = if args.target.is_empty() {
        dims.iter()
            .filter(|d| table.rows.iter().filter(|r| r.human.contains_key(*d)).count() >= 20)
            .cloned()
            .collect()
    } else {
        args.target.clone()
    };
    if table.metrics.len() >= 2 && !targets.is_empty() {
        let cfg = SelectionConfig {
            k_folds: args.folds,
            repeats: args.repeats,
            seed: common.seed(),
        };
        let reports: Vec<SelectionReport> = targets
            .iter()
            .map(|t| forward_selection(&table, t, cfg))
            .collect::<qrelscore::Result<_>>()?;
        let rows: Vec<SelectionRow<'_>> = reports
            .iter()
            .flat_map(|r| {
                r.steps.iter().map(move |s| SelectionRow {
                    target: &r.target,
                    step: s.step,
                    metric: &s.metric,
                    votes: s.votes,
                    repeats: s.repeats,
                    mean_mse: s.mean_mse,
                    mean_r2: s.mean_r2,
                })
            })
            .collect();
        output::write_csv(Some(&dir.join("selection.csv")), &head, &rows)?;
        for r in &reports {
            for d in &r.dropped {
                eprintln!("selection[{}]: dropped {} after {:?}: {}", r.target, d.metric, d.after, d.reason);
            }
        }
    }

    let group_by = args
        .group_by
        .clone()
        .or_else(|| dims.iter().find(|d| *d == "relevance").cloned());
    let dists: Vec<Distributions<'_>> = table
        .metrics
        .iter()
        .map(|m| {
            Ok(Distributions {
                metric: m,
                group_by: group_by.as_deref(),
                groups: score_distribution(&table, m, group_by.as_deref())?,
            })
        })
        .collect::<qrelscore::Result<_>>()?;
    let mut w = output::open(Some(&dir.join("distributions.json")))?;
    w.write_all(head.as_bytes())?;
    serde_json::to_writer_pretty(&mut w, &dists)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
