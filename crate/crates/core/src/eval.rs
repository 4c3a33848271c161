//! Per-zone precision against relevance judgments, improvements and
//! cross-topic aggregation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bradfordizer::ZonePartition;
use crate::corpus::{DocType, KeyMode, Qrels};
use crate::stats::{paired_t_test, wilcoxon_signed_rank, StatsError, TestResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("improvement undefined: reference precision is {0}")]
    UndefinedImprovement(f64),
    #[error("nothing to aggregate")]
    Empty,
    #[error("cannot aggregate {0} and {1} evaluations together")]
    MixedClasses(DoctypeClass, DoctypeClass),
    #[error("topics have different zone counts ({0} vs {1})")]
    ZoneCountMismatch(usize, usize),
}

/// Document classes evaluated separately: articles keyed by journal,
/// monographs keyed by publisher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoctypeClass {
    Articles,
    Monographs,
}

impl DoctypeClass {
    pub const ALL: [DoctypeClass; 2] = [DoctypeClass::Articles, DoctypeClass::Monographs];

    pub fn doctype(self) -> DocType {
        match self {
            DoctypeClass::Articles => DocType::JournalArticle,
            DoctypeClass::Monographs => DocType::Monograph,
        }
    }

    pub fn key_mode(self) -> KeyMode {
        match self {
            DoctypeClass::Articles => KeyMode::Journal,
            DoctypeClass::Monographs => KeyMode::Publisher,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DoctypeClass::Articles => "articles",
            DoctypeClass::Monographs => "monographs",
        }
    }
}

impl fmt::Display for DoctypeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnjudgedPolicy {
    #[default]
    Nonrelevant,
    Exclude,
}

impl std::str::FromStr for UnjudgedPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonrelevant" => Ok(UnjudgedPolicy::Nonrelevant),
            "exclude" => Ok(UnjudgedPolicy::Exclude),
            other => Err(format!(
                "unknown unjudged policy {other:?} (expected nonrelevant or exclude)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneCounts {
    pub name: String,
    pub relevant: usize,
    pub total: usize,
    /// relevant / total, or 0 for an empty zone.
    pub precision: f64,
    pub degenerate: bool,
}

impl ZoneCounts {
    pub fn new(name: impl Into<String>, relevant: usize, total: usize) -> Self {
        ZoneCounts {
            name: name.into(),
            relevant,
            total,
            precision: if total == 0 {
                0.0
            } else {
                relevant as f64 / total as f64
            },
            degenerate: total == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneEvaluation {
    pub topic_number: u32,
    pub doctype_class: DoctypeClass,
    /// core first, outermost zone last.
    pub zones: Vec<ZoneCounts>,
    pub baseline: ZoneCounts,
}

impl ZoneEvaluation {
    pub fn core(&self) -> &ZoneCounts {
        &self.zones[0]
    }

    pub fn outer(&self) -> &ZoneCounts {
        self.zones.last().expect("at least two zones")
    }

    pub fn precisions(&self) -> Vec<f64> {
        self.zones.iter().map(|z| z.precision).collect()
    }
}

pub fn evaluate_topic(
    partition: &ZonePartition,
    qrels: &Qrels,
    topic: u32,
    doctype_class: DoctypeClass,
    policy: UnjudgedPolicy,
) -> ZoneEvaluation {
    let zones: Vec<ZoneCounts> = partition
        .zones
        .iter()
        .map(|zone| {
            let mut relevant = 0;
            let mut total = 0;
            for id in &zone.doc_ids {
                match qrels.grade(topic, id) {
                    Some(g) => {
                        total += 1;
                        relevant += usize::from(g > 0);
                    }
                    None if policy == UnjudgedPolicy::Nonrelevant => total += 1,
                    None => {}
                }
            }
            ZoneCounts::new(zone.name.clone(), relevant, total)
        })
        .collect();
    let relevant = zones.iter().map(|z| z.relevant).sum();
    let total = zones.iter().map(|z| z.total).sum();
    ZoneEvaluation {
        topic_number: topic,
        doctype_class,
        zones,
        baseline: ZoneCounts::new("baseline", relevant, total),
    }
}

/// Relative change of `p_new` over `p_ref`, in percent.
pub fn improvement_pct(p_new: f64, p_ref: f64) -> Result<f64, EvalError> {
    if p_ref > 0.0 {
        Ok((p_new - p_ref) / p_ref * 100.0)
    } else {
        Err(EvalError::UndefinedImprovement(p_ref))
    }
}

/// Mean of per-topic improvements over topics whose reference precision is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicImprovementMean {
    pub mean_pct: Option<f64>,
    pub topics_used: usize,
    pub topics_excluded: Vec<u32>,
}

impl TopicImprovementMean {
    fn over<'a>(evals: impl Iterator<Item = (u32, f64, f64)> + 'a) -> Self {
        let mut sum = 0.0;
        let mut used = 0;
        let mut excluded = Vec::new();
        for (topic, new, reference) in evals {
            match improvement_pct(new, reference) {
                Ok(pct) => {
                    sum += pct;
                    used += 1;
                }
                Err(_) => excluded.push(topic),
            }
        }
        TopicImprovementMean {
            mean_pct: (used > 0).then(|| sum / used as f64),
            topics_used: used,
            topics_excluded: excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateEvaluation {
    pub doctype_class: DoctypeClass,
    pub per_topic: Vec<ZoneEvaluation>,
    /// Unweighted mean of each zone's precision, core first.
    pub macro_zones: Vec<(String, f64)>,
    pub macro_baseline: f64,
    /// Ratio of macro means; `None` when the reference mean is 0.
    pub improvement_core_vs_baseline_pct: Option<f64>,
    pub improvement_core_vs_outer_pct: Option<f64>,
    pub topic_mean_improvement_core_vs_baseline: TopicImprovementMean,
    pub topic_mean_improvement_core_vs_outer: TopicImprovementMean,
    /// Per-topic (core, baseline) precision pairs.
    pub paired_core_vs_baseline: Vec<(f64, f64)>,
    /// Per-topic (core, outermost zone) precision pairs.
    pub paired_core_vs_outer: Vec<(f64, f64)>,
}

impl AggregateEvaluation {
    pub fn macro_core(&self) -> f64 {
        self.macro_zones[0].1
    }

    pub fn macro_outer(&self) -> f64 {
        self.macro_zones.last().expect("zones").1
    }

    pub fn outer_name(&self) -> &str {
        &self.macro_zones.last().expect("zones").0
    }
}

pub fn aggregate(evals: &[ZoneEvaluation]) -> Result<AggregateEvaluation, EvalError> {
    let first = evals.first().ok_or(EvalError::Empty)?;
    let class = first.doctype_class;
    let k = first.zones.len();
    for e in evals {
        if e.doctype_class != class {
            return Err(EvalError::MixedClasses(class, e.doctype_class));
        }
        if e.zones.len() != k {
            return Err(EvalError::ZoneCountMismatch(k, e.zones.len()));
        }
    }
    let n = evals.len() as f64;
    let mean = |f: &dyn Fn(&ZoneEvaluation) -> f64| evals.iter().map(f).sum::<f64>() / n;

    let macro_zones: Vec<(String, f64)> = (0..k)
        .map(|i| (first.zones[i].name.clone(), mean(&|e| e.zones[i].precision)))
        .collect();
    let macro_baseline = mean(&|e| e.baseline.precision);
    let macro_core = macro_zones[0].1;
    let macro_outer = macro_zones[k - 1].1;

    Ok(AggregateEvaluation {
        doctype_class: class,
        improvement_core_vs_baseline_pct: improvement_pct(macro_core, macro_baseline).ok(),
        improvement_core_vs_outer_pct: improvement_pct(macro_core, macro_outer).ok(),
        topic_mean_improvement_core_vs_baseline: TopicImprovementMean::over(
            evals
                .iter()
                .map(|e| (e.topic_number, e.core().precision, e.baseline.precision)),
        ),
        topic_mean_improvement_core_vs_outer: TopicImprovementMean::over(
            evals
                .iter()
                .map(|e| (e.topic_number, e.core().precision, e.outer().precision)),
        ),
        paired_core_vs_baseline: evals
            .iter()
            .map(|e| (e.core().precision, e.baseline.precision))
            .collect(),
        paired_core_vs_outer: evals
            .iter()
            .map(|e| (e.core().precision, e.outer().precision))
            .collect(),
        per_topic: evals.to_vec(),
        macro_zones,
        macro_baseline,
    })
}

/// Both paired tests on one comparison; a test that cannot run keeps its error.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparison {
    pub wilcoxon: Result<TestResult, StatsError>,
    pub paired_t: Result<TestResult, StatsError>,
}

impl PairedComparison {
    pub fn run(pairs: &[(f64, f64)], alpha: f64) -> Self {
        PairedComparison {
            wilcoxon: wilcoxon_signed_rank(pairs, alpha),
            paired_t: paired_t_test(pairs, alpha),
        }
    }

    /// True when both tests ran and both rejected.
    pub fn both_significant(&self) -> bool {
        matches!((&self.wilcoxon, &self.paired_t), (Ok(w), Ok(t)) if w.significant && t.significant)
    }
}
