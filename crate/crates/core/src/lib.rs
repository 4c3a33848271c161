//! Bradfordizing for bibliographic result sets.
//!
//! Result lists are merged across databases, re-ranked by source productivity,
//! cut into Bradford zones and evaluated for per-zone precision with paired
//! significance tests.

pub mod bradfordizer;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod federation;
pub mod pipeline;
pub mod scattering;
pub mod stats;

pub use bradfordizer::{
    bradfordize, core_documents, partition_zones, BradfordizedRanking, ZoneMode, ZonePartition,
};
pub use corpus::{
    normalize_key, parse_documents, parse_qrels, parse_topics, source_key, CorpusAccounting,
    CorpusError, DocFormat, DocType, Document, KeyMode, Qrels, SourceKey, SourceKind, Topic,
};
pub use eval::{
    aggregate, evaluate_topic, improvement_pct, AggregateEvaluation, DoctypeClass, UnjudgedPolicy,
};
pub use federation::{merge_result_sets, MergeReport};
pub use scattering::{aggregate_profiles, loglog_points, scattering_profile, ScatteringProfile};
pub use stats::{paired_t_test, wilcoxon_signed_rank, TestResult};
