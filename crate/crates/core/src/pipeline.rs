//! End-to-end orchestration: load and merge corpora, build per-topic result
//! sets, and run the bradfordize / zones / analyze / eval / stats commands.
//!
//! Every command writes into the configured output directory. Output is a
//! pure function of the inputs: JSON keys are sorted, numbers are rounded to
//! fixed precision and topics are emitted in ascending order whatever the
//! worker count.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::bradfordizer::{
    bradfordize, core_documents, partition_zones, BradfordizedRanking, ZoneMode, ZonePartition,
};
use crate::corpus::{
    parse_documents, parse_qrels, parse_topics, write_girt, CorpusAccounting, CorpusError,
    DocFormat, Document, KeyMode, Qrels, SourceKind, Topic,
};
use crate::eval::{
    aggregate, evaluate_topic, AggregateEvaluation, DoctypeClass, PairedComparison,
    TopicImprovementMean, UnjudgedPolicy, ZoneCounts, ZoneEvaluation,
};
use crate::federation::{merge_result_sets, FederationError, MergeReport};
use crate::scattering::{aggregate_profiles, plot_csv, scattering_profile, Multipliers};
use crate::stats::{StatsError, TestResult};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: CorpusError },
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    /// 1 for usage and configuration problems, 2 for bad or unusable data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub document_files: Vec<(String, PathBuf)>,
    pub topic_file: Option<PathBuf>,
    pub qrels_file: Option<PathBuf>,
    /// TREC run file defining per-topic result lists; the qrels pool is used otherwise.
    pub run_file: Option<PathBuf>,
    pub key_mode: KeyMode,
    pub zone_mode: ZoneMode,
    pub num_zones: usize,
    pub unjudged_policy: UnjudgedPolicy,
    pub alpha: f64,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub topic: Option<u32>,
    pub pairs_file: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            document_files: Vec::new(),
            topic_file: None,
            qrels_file: None,
            run_file: None,
            key_mode: KeyMode::Auto,
            zone_mode: ZoneMode::Snap,
            num_zones: 3,
            unjudged_policy: UnjudgedPolicy::Nonrelevant,
            alpha: 0.05,
            output_dir: PathBuf::from("out"),
            workers: 1,
            topic: None,
            pairs_file: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, needs_documents: bool) -> Result<(), PipelineError> {
        if self.num_zones < 2 {
            return Err(PipelineError::Config(format!(
                "--zones must be at least 2, got {}",
                self.num_zones
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PipelineError::Config(format!(
                "--alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.workers == 0 {
            return Err(PipelineError::Config("--workers must be at least 1".into()));
        }
        if needs_documents && self.document_files.is_empty() {
            return Err(PipelineError::Config(
                "at least one --docs db=path is required".into(),
            ));
        }
        Ok(())
    }
}

/// What a command produced besides its files.
#[derive(Debug, Default)]
pub struct Outcome {
    pub warnings: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }
}

fn read(path: &Path) -> Result<Vec<u8>, PipelineError> {
    fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str, outcome: &mut Outcome) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)?;
    outcome.written.push(path.to_path_buf());
    Ok(())
}

fn write_json(path: &Path, value: &Value, outcome: &mut Outcome) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write(path, &text, outcome)
}

fn round_dp(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let r = (x * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Precisions: 3 decimals.
fn prec(x: f64) -> Value {
    json!(round_dp(x, 3))
}

/// Percentages: 2 decimals.
fn pct(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(round_dp(v, 2)))
}

/// 4 significant digits.
fn sig4(x: f64) -> Value {
    if x == 0.0 || !x.is_finite() {
        return json!(if x.is_finite() { 0.0 } else { x });
    }
    json!(format!("{x:.3e}")
        .parse::<f64>()
        .expect("formatted float parses"))
}

fn to_sorted(value: impl serde::Serialize) -> Value {
    serde_json::to_value(value).expect("plain data serializes")
}

pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    pub report: MergeReport,
}

pub fn load_corpus(config: &PipelineConfig) -> Result<LoadedCorpus, PipelineError> {
    let lists = config
        .document_files
        .par_iter()
        .map(|(db, path)| {
            let bytes = read(path)?;
            let docs = parse_documents(&bytes, DocFormat::GirtXml, db).map_err(|source| {
                PipelineError::Parse {
                    path: path.clone(),
                    source,
                }
            })?;
            Ok((db.clone(), docs))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let (documents, report) = merge_result_sets(&lists)?;
    Ok(LoadedCorpus { documents, report })
}

fn load_qrels(config: &PipelineConfig) -> Result<Option<Qrels>, PipelineError> {
    config
        .qrels_file
        .as_ref()
        .map(|path| {
            parse_qrels(&read(path)?).map_err(|source| PipelineError::Parse {
                path: path.clone(),
                source,
            })
        })
        .transpose()
}

fn load_topics(config: &PipelineConfig) -> Result<Option<Vec<Topic>>, PipelineError> {
    config
        .topic_file
        .as_ref()
        .map(|path| {
            parse_topics(&read(path)?).map_err(|source| PipelineError::Parse {
                path: path.clone(),
                source,
            })
        })
        .transpose()
}

/// Per-topic ranked document lists from a TREC run file
/// (`topic Q0 doc_id rank score tag`), in rank order.
pub fn parse_run(input: &[u8]) -> Result<BTreeMap<u32, Vec<String>>, String> {
    let text = std::str::from_utf8(input).map_err(|_| "run file is not UTF-8".to_string())?;
    let mut rows: BTreeMap<u32, Vec<(i64, String)>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() < 3 {
            return Err(format!("run line {}: expected at least 3 columns", idx + 1));
        }
        let topic: u32 = cols[0]
            .parse()
            .map_err(|_| format!("run line {}: invalid topic {:?}", idx + 1, cols[0]))?;
        let rank: i64 = match cols.get(3) {
            Some(r) => r
                .parse()
                .map_err(|_| format!("run line {}: invalid rank {:?}", idx + 1, r))?,
            None => idx as i64,
        };
        rows.entry(topic)
            .or_default()
            .push((rank, cols[2].to_string()));
    }
    Ok(rows
        .into_iter()
        .map(|(t, mut v)| {
            v.sort();
            let mut seen = std::collections::HashSet::new();
            (
                t,
                v.into_iter()
                    .map(|(_, d)| d)
                    .filter(|d| seen.insert(d.clone()))
                    .collect(),
            )
        })
        .collect())
}

/// One topic's result set. `topic` is `None` when the whole corpus is a single set.
#[derive(Debug, Clone)]
pub struct ResultSet {
    pub topic: Option<u32>,
    pub documents: Vec<Document>,
    /// Listed ids that are not in the corpus.
    pub missing: usize,
}

impl ResultSet {
    pub fn label(&self) -> String {
        self.topic
            .map_or_else(|| "all".to_string(), |t| format!("topic_{t}"))
    }

    fn of_class(&self, class: DoctypeClass) -> Vec<Document> {
        self.documents
            .iter()
            .filter(|d| d.doctype == class.doctype())
            .cloned()
            .collect()
    }
}

/// Everything the per-topic commands need.
pub struct Workspace {
    pub corpus: LoadedCorpus,
    pub qrels: Option<Qrels>,
    pub topics: Option<Vec<Topic>>,
    pub result_sets: Vec<ResultSet>,
}

pub fn prepare(config: &PipelineConfig) -> Result<Workspace, PipelineError> {
    let corpus = load_corpus(config)?;
    let qrels = load_qrels(config)?;
    let topics = load_topics(config)?;
    let run = config
        .run_file
        .as_ref()
        .map(|p| {
            parse_run(&read(p)?).map_err(|m| PipelineError::Data(format!("{}: {m}", p.display())))
        })
        .transpose()?;

    let by_id: HashMap<&str, &Document> = corpus
        .documents
        .iter()
        .map(|d| (d.doc_id.as_str(), d))
        .collect();

    let mut numbers: Vec<u32> = match (&topics, &run, &qrels) {
        (Some(t), _, _) => t.iter().map(|t| t.number).collect(),
        (None, Some(run), _) => run.keys().copied().collect(),
        (None, None, Some(q)) => q.topics().into_iter().collect(),
        (None, None, None) => Vec::new(),
    };
    numbers.sort_unstable();
    if let Some(only) = config.topic {
        numbers.retain(|n| *n == only);
        if numbers.is_empty() {
            return Err(PipelineError::Data(format!(
                "topic {only} is not defined by the inputs"
            )));
        }
    }

    let collect = |ids: &mut dyn Iterator<Item = &str>| {
        let mut docs = Vec::new();
        let mut missing = 0;
        for id in ids {
            match by_id.get(id) {
                Some(d) => docs.push((*d).clone()),
                None => missing += 1,
            }
        }
        (docs, missing)
    };

    let result_sets = if run.is_none() && qrels.is_none() {
        vec![ResultSet {
            topic: None,
            documents: corpus.documents.clone(),
            missing: 0,
        }]
    } else {
        numbers
            .iter()
            .map(|&t| {
                let (documents, missing) = match (&run, &qrels) {
                    (Some(run), _) => {
                        collect(&mut run.get(&t).into_iter().flatten().map(String::as_str))
                    }
                    (None, Some(q)) => collect(&mut q.pool(t).map(|(d, _)| d)),
                    (None, None) => unreachable!(),
                };
                ResultSet {
                    topic: Some(t),
                    documents,
                    missing,
                }
            })
            .collect()
    };

    Ok(Workspace {
        corpus,
        qrels,
        topics,
        result_sets,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start {workers} workers: {e}")))
}

pub fn cmd_merge(config: &PipelineConfig) -> Result<Outcome, PipelineError> {
    config.validate(true)?;
    let corpus = load_corpus(config)?;
    let mut outcome = Outcome::default();
    let dir = &config.output_dir;
    write(
        &dir.join("merged.xml"),
        &write_girt(&corpus.documents),
        &mut outcome,
    )?;
    write_json(
        &dir.join("merge_report.json"),
        &to_sorted(&corpus.report),
        &mut outcome,
    )?;
    Ok(outcome)
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Core sources as a two-column table, most productive first.
pub fn core_sources_table(ranking: &BradfordizedRanking, partition: &ZonePartition) -> String {
    let core_sources = &ranking.sources[..partition.core().source_count];
    let kinds: Vec<SourceKind> = core_sources.iter().map(|s| s.source_key.kind).collect();
    let header = if kinds.iter().all(|k| *k == SourceKind::Journal) {
        "Journal\tNo. of papers"
    } else if kinds.iter().all(|k| *k == SourceKind::Publisher) {
        "Publisher\tNo. of monographs"
    } else {
        "Source\tNo. of documents"
    };
    let mut out = format!("{header}\n");
    for s in core_sources {
        let _ = writeln!(out, "{}\t{}", s.label, thousands(s.productivity));
    }
    out
}

fn partition_json(
    partition: &ZonePartition,
    ranking: &BradfordizedRanking,
    topic: Option<u32>,
) -> Value {
    json!({
        "topic": topic,
        "mode": partition.mode.to_string(),
        "degenerate": partition.degenerate,
        "skipped": ranking.skipped.len(),
        "zones": partition.zones.iter().map(|z| json!({
            "name": z.name,
            "doc_count": z.doc_count,
            "source_count": z.source_count,
            "doc_ids": z.doc_ids,
        })).collect::<Vec<_>>(),
    })
}

struct Ranked {
    set: ResultSet,
    ranking: BradfordizedRanking,
    partition: Option<ZonePartition>,
}

fn rank_all(config: &PipelineConfig, sets: &[ResultSet]) -> Result<Vec<Ranked>, PipelineError> {
    let mode = config.key_mode;
    let ranked = pool(config.workers)?.install(|| {
        sets.par_iter()
            .map(|set| {
                let ranking = bradfordize(&set.documents, mode);
                let partition = partition_zones(&ranking, config.num_zones, config.zone_mode).ok();
                Ranked {
                    set: set.clone(),
                    ranking,
                    partition,
                }
            })
            .collect()
    });
    Ok(ranked)
}

pub fn cmd_bradfordize(config: &PipelineConfig) -> Result<Outcome, PipelineError> {
    config.validate(true)?;
    let ws = prepare(config)?;
    let mut outcome = Outcome::default();
    let base = config.output_dir.join("bradfordize");
    for r in rank_all(config, &ws.result_sets)? {
        let dir = base.join(r.set.label());
        if r.ranking.is_empty() {
            outcome.warn(format!(
                "{}: no bradfordizable documents ({} skipped)",
                r.set.label(),
                r.ranking.skipped.len()
            ));
        }
        let mut ranking = to_sorted(&r.ranking);
        ranking["topic"] = json!(r.set.topic);
        ranking["key_mode"] = to_sorted(config.key_mode);
        write_json(&dir.join("ranking.json"), &ranking, &mut outcome)?;
        let (core, table) = match &r.partition {
            Some(p) => (core_documents(p), core_sources_table(&r.ranking, p)),
            None => (Vec::new(), String::new()),
        };
        let mut core_text = core.join("\n");
        if !core_text.is_empty() {
            core_text.push('\n');
        }
        write(&dir.join("core.txt"), &core_text, &mut outcome)?;
        write(&dir.join("core_sources.tsv"), &table, &mut outcome)?;
    }
    Ok(outcome)
}

pub fn cmd_zones(config: &PipelineConfig) -> Result<Outcome, PipelineError> {
    config.validate(true)?;
    let ws = prepare(config)?;
    let mut outcome = Outcome::default();
    let base = config.output_dir.join("zones");
    for r in rank_all(config, &ws.result_sets)? {
        match &r.partition {
            Some(p) => {
                if p.degenerate {
                    outcome.warn(format!(
                        "{}: only {} sources for {} zones",
                        r.set.label(),
                        r.ranking.sources.len(),
                        config.num_zones
                    ));
                }
                write_json(
                    &base.join(format!("{}.json", r.set.label())),
                    &partition_json(p, &r.ranking, r.set.topic),
                    &mut outcome,
                )?;
            }
            None => outcome.warn(format!("{}: empty ranking, no zones", r.set.label())),
        }
    }
    Ok(outcome)
}

fn multipliers_json(m: &Multipliers) -> Value {
    json!({
        "outer_root": m.outer_root.map(|v| round_dp(v, 2)),
        "adjacent": m.adjacent.iter().map(|a| a.map(|v| round_dp(v, 2))).collect::<Vec<_>>(),
    })
}

pub fn cmd_analyze(config: &PipelineConfig) -> Result<Outcome, PipelineError> {
    config.validate(true)?;
    let ws = prepare(config)?;
    let mut outcome = Outcome::default();
    let base = config.output_dir.join("analyze");
    let workers = pool(config.workers)?;
    let mut summary = Map::new();

    for class in DoctypeClass::ALL {
        let computed: Vec<_> = workers.install(|| {
            ws.result_sets
                .par_iter()
                .map(|set| {
                    let ranking = bradfordize(&set.of_class(class), class.key_mode());
                    let profile = partition_zones(&ranking, config.num_zones, config.zone_mode)
                        .map_err(|e| e.to_string())
                        .and_then(|p| {
                            scattering_profile(&ranking, &p)
                                .map(|prof| (prof, p.doc_counts()))
                                .map_err(|e| e.to_string())
                        });
                    (set.label(), set.topic, profile)
                })
                .collect()
        });

        let mut profiles = Vec::new();
        let mut per_topic = Vec::new();
        let mut skipped = Vec::new();
        for (label, topic, result) in computed {
            match result {
                Ok((profile, doc_counts)) => {
                    write(
                        &base.join(class.as_str()).join(format!("{label}.csv")),
                        &plot_csv(&profile),
                        &mut outcome,
                    )?;
                    per_topic.push(json!({
                        "topic": topic,
                        "total_docs": profile.total_docs,
                        "total_sources": profile.total_sources,
                        "zone_doc_counts": doc_counts,
                        "zone_source_counts": profile.zone_source_counts,
                        "multipliers": multipliers_json(&profile.multipliers),
                    }));
                    profiles.push(profile);
                }
                Err(reason) => {
                    outcome.warn(format!("{label} ({class}): skipped, {reason}"));
                    skipped.push(json!({ "topic": topic, "reason": reason }));
                }
            }
        }
        let entry = match aggregate_profiles(&profiles) {
            Ok(s) => json!({
                "topics": s.topics,
                "mean_total_docs": round_dp(s.mean_total_docs, 2),
                "mean_total_sources": round_dp(s.mean_total_sources, 2),
                "mean_zone_source_counts": zone_map(s.mean_zone_source_counts.iter().map(|c| json!(round_dp(*c, 2)))),
                "multipliers": multipliers_json(&s.multipliers),
                "per_topic": per_topic,
                "skipped_topics": skipped,
            }),
            Err(_) => json!({ "topics": 0, "skipped_topics": skipped }),
        };
        summary.insert(class.as_str().into(), entry);
    }
    summary.insert("zone_mode".into(), json!(config.zone_mode.to_string()));
    summary.insert("num_zones".into(), json!(config.num_zones));
    write_json(
        &base.join("summary.json"),
        &Value::Object(summary),
        &mut outcome,
    )?;
    Ok(outcome)
}

fn zone_map(values: impl Iterator<Item = Value>) -> Value {
    Value::Object(
        values
            .enumerate()
            .map(|(i, v)| (crate::bradfordizer::zone_name(i), v))
            .collect(),
    )
}

/// Evaluation of one document class across topics.
pub struct ClassEvaluation {
    pub class: DoctypeClass,
    pub aggregate: Option<AggregateEvaluation>,
    pub skipped_topics: Vec<(u32, String)>,
    pub core_vs_baseline: Option<PairedComparison>,
    pub core_vs_outer: Option<PairedComparison>,
}

pub struct EvaluationRun {
    pub classes: Vec<ClassEvaluation>,
    pub accounting: CorpusAccounting,
    pub missing_documents: usize,
}

pub fn run_evaluation(
    config: &PipelineConfig,
    ws: &Workspace,
) -> Result<EvaluationRun, PipelineError> {
    let qrels = ws
        .qrels
        .as_ref()
        .ok_or_else(|| PipelineError::Config("--qrels is required for evaluation".into()))?;
    let judged = qrels.topics();
    if !ws
        .result_sets
        .iter()
        .any(|s| s.topic.is_some_and(|t| judged.contains(&t)))
    {
        return Err(PipelineError::Data(
            "the relevance judgments cover none of the topics".into(),
        ));
    }
    let workers = pool(config.workers)?;
    let mut accounting = CorpusAccounting::default();
    let mut missing_documents = 0;
    for set in &ws.result_sets {
        let acc = CorpusAccounting::of(&set.documents, KeyMode::Auto);
        accounting.total += acc.total;
        accounting.bradfordizable += acc.bradfordizable;
        accounting.skipped += acc.skipped;
        accounting.journal_articles += acc.journal_articles;
        accounting.monographs += acc.monographs;
        accounting.other += acc.other;
        missing_documents += set.missing;
    }

    let mut classes = Vec::new();
    for class in DoctypeClass::ALL {
        let per_topic: Vec<Result<ZoneEvaluation, (u32, String)>> = workers.install(|| {
            ws.result_sets
                .par_iter()
                .filter_map(|set| set.topic.map(|t| (t, set)))
                .map(|(topic, set)| {
                    if !judged.contains(&topic) {
                        return Err((topic, "no relevance judgments".to_string()));
                    }
                    let ranking = bradfordize(&set.of_class(class), class.key_mode());
                    let partition = partition_zones(&ranking, config.num_zones, config.zone_mode)
                        .map_err(|e| (topic, e.to_string()))?;
                    Ok(evaluate_topic(
                        &partition,
                        qrels,
                        topic,
                        class,
                        config.unjudged_policy,
                    ))
                })
                .collect()
        });
        let mut evals = Vec::new();
        let mut skipped_topics = Vec::new();
        for r in per_topic {
            match r {
                Ok(e) => evals.push(e),
                Err(s) => skipped_topics.push(s),
            }
        }
        let aggregate = aggregate(&evals).ok();
        let compare = |pairs: &[(f64, f64)]| {
            if pairs.len() < 2 {
                let insufficient = Err(StatsError::InsufficientData {
                    needed: 2,
                    got: pairs.len(),
                });
                PairedComparison {
                    wilcoxon: insufficient.clone(),
                    paired_t: insufficient,
                }
            } else {
                PairedComparison::run(pairs, config.alpha)
            }
        };
        classes.push(ClassEvaluation {
            class,
            core_vs_baseline: aggregate
                .as_ref()
                .map(|a| compare(&a.paired_core_vs_baseline)),
            core_vs_outer: aggregate.as_ref().map(|a| compare(&a.paired_core_vs_outer)),
            aggregate,
            skipped_topics,
        });
    }
    Ok(EvaluationRun {
        classes,
        accounting,
        missing_documents,
    })
}

fn test_json(result: &Result<TestResult, StatsError>) -> Value {
    match result {
        Ok(t) => json!({
            "method": to_sorted(t.method),
            "statistic": sig4(t.statistic),
            "p_value": sig4(t.p_value),
            "n_effective": t.n_effective,
            "zeros_dropped": t.zeros_dropped,
            "alpha": t.alpha,
            "significant": t.significant,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn counts_json(c: &ZoneCounts) -> Value {
    json!({
        "relevant": c.relevant,
        "total": c.total,
        "precision": prec(c.precision),
        "degenerate": c.degenerate,
    })
}

fn topic_mean_json(m: &TopicImprovementMean) -> Value {
    json!({
        "mean_pct": pct(m.mean_pct),
        "topics_used": m.topics_used,
        "topics_excluded": m.topics_excluded,
    })
}

fn significance_json(c: &ClassEvaluation, outer: &str) -> (Value, Value) {
    let pick = |f: fn(&PairedComparison) -> &Result<TestResult, StatsError>| {
        let mut m = Map::new();
        if let Some(cmp) = &c.core_vs_baseline {
            m.insert("core_vs_baseline".into(), test_json(f(cmp)));
        }
        if let Some(cmp) = &c.core_vs_outer {
            m.insert(format!("core_vs_{outer}"), test_json(f(cmp)));
        }
        Value::Object(m)
    };
    (pick(|c| &c.wilcoxon), pick(|c| &c.paired_t))
}

fn class_json(c: &ClassEvaluation) -> Value {
    let skipped: Vec<Value> = c
        .skipped_topics
        .iter()
        .map(|(t, why)| json!({ "topic": t, "reason": why }))
        .collect();
    let Some(agg) = &c.aggregate else {
        return json!({ "topics": 0, "skipped_topics": skipped });
    };
    let outer = agg.outer_name().to_string();
    let (wilcoxon, paired_t) = significance_json(c, &outer);
    let mut m = Map::new();
    m.insert("topics".into(), json!(agg.per_topic.len()));
    m.insert("baseline".into(), prec(agg.macro_baseline));
    for (name, p) in &agg.macro_zones {
        m.insert(name.clone(), prec(*p));
    }
    m.insert(
        "improvement_core_vs_baseline_pct".into(),
        pct(agg.improvement_core_vs_baseline_pct),
    );
    m.insert(
        format!("improvement_core_vs_{outer}_pct"),
        pct(agg.improvement_core_vs_outer_pct),
    );
    m.insert(
        "topic_mean_improvement_core_vs_baseline".into(),
        topic_mean_json(&agg.topic_mean_improvement_core_vs_baseline),
    );
    m.insert(
        format!("topic_mean_improvement_core_vs_{outer}"),
        topic_mean_json(&agg.topic_mean_improvement_core_vs_outer),
    );
    m.insert("wilcoxon".into(), wilcoxon);
    m.insert("paired_t".into(), paired_t);
    m.insert(
        "per_topic".into(),
        Value::Array(
            agg.per_topic
                .iter()
                .map(|e| {
                    let mut t = Map::new();
                    t.insert("topic".into(), json!(e.topic_number));
                    t.insert("baseline".into(), counts_json(&e.baseline));
                    for z in &e.zones {
                        t.insert(z.name.clone(), counts_json(z));
                    }
                    Value::Object(t)
                })
                .collect(),
        ),
    );
    m.insert("skipped_topics".into(), Value::Array(skipped));
    Value::Object(m)
}

fn precision_csv(agg: &AggregateEvaluation) -> String {
    let names: Vec<&str> = agg.macro_zones.iter().map(|(n, _)| n.as_str()).collect();
    let mut out = format!("topic,{},baseline\n", names.join(","));
    for e in &agg.per_topic {
        let zones: Vec<String> = e
            .zones
            .iter()
            .map(|z| format!("{:.3}", z.precision))
            .collect();
        let _ = writeln!(
            out,
            "{},{},{:.3}",
            e.topic_number,
            zones.join(","),
            e.baseline.precision
        );
    }
    out
}

pub fn cmd_eval(config: &PipelineConfig) -> Result<Outcome, PipelineError> {
    config.validate(true)?;
    let ws = prepare(config)?;
    let run = run_evaluation(config, &ws)?;
    let mut outcome = Outcome::default();
    let base = config.output_dir.join("eval");

    let mut report = Map::new();
    report.insert("alpha".into(), json!(config.alpha));
    report.insert("sidedness".into(), json!("two-sided"));
    report.insert("zone_mode".into(), json!(config.zone_mode.to_string()));
    report.insert("num_zones".into(), json!(config.num_zones));
    report.insert("unjudged_policy".into(), to_sorted(config.unjudged_policy));
    report.insert("accounting".into(), to_sorted(run.accounting));
    report.insert("missing_documents".into(), json!(run.missing_documents));
    for c in &run.classes {
        if c.aggregate.is_none() {
            outcome.warn(format!("{}: no topic could be evaluated", c.class));
        }
        report.insert(c.class.as_str().into(), class_json(c));
        if let Some(agg) = &c.aggregate {
            write(
                &base.join(format!("precision_{}.csv", c.class)),
                &precision_csv(agg),
                &mut outcome,
            )?;
        }
    }
    write_json(
        &base.join("report.json"),
        &Value::Object(report),
        &mut outcome,
    )?;
    Ok(outcome)
}

/// Reads `a,b` pairs, one per line; a non-numeric first line is a header.
pub fn parse_pairs(input: &[u8]) -> Result<Vec<(f64, f64)>, String> {
    let text = std::str::from_utf8(input).map_err(|_| "pairs file is not UTF-8".to_string())?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => pairs.push(p),
            None if idx == 0 => {}
            None => return Err(format!("pairs line {}: expected two numbers", idx + 1)),
        }
    }
    Ok(pairs)
}

pub fn cmd_stats(config: &PipelineConfig) -> Result<Outcome, PipelineError> {
    let mut outcome = Outcome::default();
    let path = config.output_dir.join("stats").join("significance.json");
    if let Some(pairs_path) = &config.pairs_file {
        config.validate(false)?;
        let pairs = parse_pairs(&read(pairs_path)?)
            .map_err(|m| PipelineError::Data(format!("{}: {m}", pairs_path.display())))?;
        let cmp = PairedComparison::run(&pairs, config.alpha);
        let value = json!({
            "pairs": pairs.len(),
            "wilcoxon": test_json(&cmp.wilcoxon),
            "paired_t": test_json(&cmp.paired_t),
        });
        write_json(&path, &value, &mut outcome)?;
        return Ok(outcome);
    }
    config.validate(true)?;
    let ws = prepare(config)?;
    let run = run_evaluation(config, &ws)?;
    let mut report = Map::new();
    report.insert("alpha".into(), json!(config.alpha));
    for c in &run.classes {
        let value = match &c.aggregate {
            Some(agg) => {
                let (wilcoxon, paired_t) = significance_json(c, agg.outer_name());
                json!({ "topics": agg.per_topic.len(), "wilcoxon": wilcoxon, "paired_t": paired_t })
            }
            None => json!({ "topics": 0 }),
        };
        report.insert(c.class.as_str().into(), value);
    }
    write_json(&path, &Value::Object(report), &mut outcome)?;
    Ok(outcome)
}
