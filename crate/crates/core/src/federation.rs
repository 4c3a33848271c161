//! Combining per-database result lists into one deduplicated set.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Document;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FederationError {
    #[error("document id {doc_id:?} appears twice in the list from {database_id:?}")]
    DuplicateWithinList { database_id: String, doc_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeReport {
    pub input_counts: BTreeMap<String, usize>,
    pub duplicates_removed: usize,
    pub merged_count: usize,
}

/// Merges result lists, keeping the first occurrence of every `doc_id`.
///
/// Lists are scanned in the given order, which acts as database priority:
/// it decides which copy of a duplicate survives and nothing else.
pub fn merge_result_sets(
    lists: &[(String, Vec<Document>)],
) -> Result<(Vec<Document>, MergeReport), FederationError> {
    let mut report = MergeReport::default();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut merged = Vec::new();

    for (database_id, docs) in lists {
        let mut local: HashSet<&str> = HashSet::with_capacity(docs.len());
        for doc in docs {
            if !local.insert(&doc.doc_id) {
                return Err(FederationError::DuplicateWithinList {
                    database_id: database_id.clone(),
                    doc_id: doc.doc_id.clone(),
                });
            }
            if seen.insert(&doc.doc_id) {
                merged.push(doc.clone());
            } else {
                report.duplicates_removed += 1;
            }
        }
        *report.input_counts.entry(database_id.clone()).or_default() += docs.len();
    }
    report.merged_count = merged.len();
    Ok((merged, report))
}
