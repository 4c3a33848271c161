//! Seeded synthetic topics with a Bradford-shaped source distribution.
//!
//! Source sizes follow a Leimkuhler curve: the cumulative document count at
//! source rank r is `a * ln(1 + r / c)`, rounded, with every source keeping at
//! least one document. `a` is solved so the sizes sum close to the target.
//! A document's chance of being relevant grows with the log of its source's
//! productivity.

#![allow(dead_code)]

use bradford::{
    aggregate, bradfordize, evaluate_topic, partition_zones, AggregateEvaluation, DocType,
    DoctypeClass, Document, Qrels, UnjudgedPolicy, ZoneMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct TopicShape {
    pub sources: usize,
    pub sources_spread: usize,
    pub docs: usize,
    pub docs_spread: usize,
    /// Leimkuhler curvature; smaller means a more concentrated core.
    pub c: f64,
    /// Relevance probability is `base + slope * ln(productivity)`, clamped to [0, 1].
    pub base: f64,
    pub slope: f64,
}

pub const ARTICLES: TopicShape = TopicShape {
    sources: 61,
    sources_spread: 6,
    docs: 142,
    docs_spread: 12,
    c: 2.2,
    base: 0.16,
    slope: 0.06,
};

/// Publisher blocks: flatter, and relevance barely tied to productivity.
pub const MONOGRAPHS: TopicShape = TopicShape {
    sources: 90,
    sources_spread: 6,
    docs: 211,
    docs_spread: 12,
    c: 5.0,
    base: 0.17,
    slope: 0.02,
};

pub const TOPICS_PER_RUN: u32 = 25;

fn leimkuhler(sources: usize, a: f64, c: f64) -> Vec<usize> {
    let cum: Vec<i64> = (0..=sources)
        .map(|r| (a * (1.0 + r as f64 / c).ln()).round() as i64)
        .collect();
    cum.windows(2)
        .map(|w| (w[1] - w[0]).max(1) as usize)
        .collect()
}

/// Block sizes (descending) for one topic.
pub fn block_sizes(rng: &mut ChaCha8Rng, shape: &TopicShape) -> Vec<usize> {
    let j =
        rng.gen_range(shape.sources - shape.sources_spread..=shape.sources + shape.sources_spread);
    let n = rng.gen_range(shape.docs - shape.docs_spread..=shape.docs + shape.docs_spread);
    let (mut lo, mut hi) = (1.0, 500.0);
    let mut sizes = leimkuhler(j, lo, shape.c);
    for _ in 0..60 {
        let a = (lo + hi) / 2.0;
        sizes = leimkuhler(j, a, shape.c);
        if sizes.iter().sum::<usize>() < n {
            lo = a;
        } else {
            hi = a;
        }
    }
    sizes.sort_unstable_by(|x, y| y.cmp(x));
    sizes
}

pub struct SyntheticRun {
    pub docs: Vec<(u32, Vec<Document>)>,
    pub qrels: Qrels,
}

pub fn generate(seed: u64, shape: &TopicShape, doctype: DocType) -> SyntheticRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qrels = Qrels::new();
    let mut docs = Vec::new();
    for topic in 1..=TOPICS_PER_RUN {
        let sizes = block_sizes(&mut rng, shape);
        let mut topic_docs = Vec::new();
        for (j, &q) in sizes.iter().enumerate() {
            let p = (shape.base + shape.slope * (q as f64).ln()).clamp(0.0, 1.0);
            for i in 0..q {
                let id = format!("t{topic:02}-s{j:03}-d{i:03}");
                qrels.insert(topic, id.clone(), u32::from(rng.gen_bool(p)));
                topic_docs.push(Document::new(id, doctype).with_source(format!("Source {j:03}")));
            }
        }
        docs.push((topic, topic_docs));
    }
    SyntheticRun { docs, qrels }
}

/// Bradfordize every topic into three snapped zones and aggregate precision.
pub fn evaluate_run(run: &SyntheticRun, class: DoctypeClass) -> AggregateEvaluation {
    let evals: Vec<_> = run
        .docs
        .iter()
        .map(|(topic, docs)| {
            let ranking = bradfordize(docs, class.key_mode());
            let partition = partition_zones(&ranking, 3, ZoneMode::Snap).expect("non-empty topic");
            evaluate_topic(
                &partition,
                &run.qrels,
                *topic,
                class,
                UnjudgedPolicy::Nonrelevant,
            )
        })
        .collect();
    aggregate(&evals).expect("uniform class")
}

pub fn articles(seed: u64) -> AggregateEvaluation {
    evaluate_run(
        &generate(seed, &ARTICLES, DocType::JournalArticle),
        DoctypeClass::Articles,
    )
}

pub fn monographs(seed: u64) -> AggregateEvaluation {
    evaluate_run(
        &generate(seed, &MONOGRAPHS, DocType::Monograph),
        DoctypeClass::Monographs,
    )
}
