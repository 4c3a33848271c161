//! Re-ranking by source productivity and cutting the ranking into Bradford zones.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{source_key, Document, KeyMode, SourceKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZoneError {
    #[error("cannot partition an empty ranking")]
    EmptyRanking,
    #[error("need at least 2 zones, got {0}")]
    TooFewZones(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedEntry {
    /// 1-based position in the re-ranked list.
    pub position: usize,
    pub doc_id: String,
    pub source_key: SourceKey,
    /// 1-based rank of the source block.
    pub source_rank: usize,
    pub source_productivity: usize,
}

/// One source block of a ranking, in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub rank: usize,
    pub source_key: SourceKey,
    /// Display name: the smallest raw source field seen in the block, or the key.
    pub label: String,
    pub productivity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BradfordizedRanking {
    pub entries: Vec<RankedEntry>,
    pub sources: Vec<SourceSummary>,
    /// Documents without a resolvable source key, ascending.
    pub skipped: Vec<String>,
}

impl BradfordizedRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    /// Block lengths in rank order.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.sources.iter().map(|s| s.productivity).collect()
    }
}

/// Groups documents by source and orders the groups by descending size.
///
/// Ties between equally productive sources go to the smaller key; documents
/// inside a block are ordered by `doc_id`. The output depends only on the
/// multiset of input documents.
pub fn bradfordize(docs: &[Document], mode: KeyMode) -> BradfordizedRanking {
    let mut blocks: BTreeMap<SourceKey, Vec<&Document>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for doc in docs {
        match source_key(doc, mode) {
            Some(key) => blocks.entry(key).or_default().push(doc),
            None => skipped.push(doc.doc_id.clone()),
        }
    }
    skipped.sort();

    let mut blocks: Vec<(SourceKey, Vec<&Document>)> = blocks.into_iter().collect();
    // BTreeMap iteration is key-ascending, so a stable sort on size keeps the tie-break.
    blocks.sort_by_key(|b| std::cmp::Reverse(b.1.len()));

    let mut entries = Vec::with_capacity(docs.len() - skipped.len());
    let mut sources = Vec::with_capacity(blocks.len());
    for (idx, (key, mut members)) in blocks.into_iter().enumerate() {
        let rank = idx + 1;
        let productivity = members.len();
        members.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let label = members
            .iter()
            .filter_map(|d| d.source_field.as_deref().map(str::trim))
            .filter(|s| !s.is_empty())
            .min()
            .map_or_else(|| key.key.clone(), String::from);
        for doc in members {
            entries.push(RankedEntry {
                position: entries.len() + 1,
                doc_id: doc.doc_id.clone(),
                source_key: key.clone(),
                source_rank: rank,
                source_productivity: productivity,
            });
        }
        sources.push(SourceSummary {
            rank,
            source_key: key,
            label,
            productivity,
        });
    }
    BradfordizedRanking {
        entries,
        sources,
        skipped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZoneMode {
    /// Equal document counts; a source may straddle two zones.
    Strict,
    /// Boundaries moved to the nearest source-block edges.
    #[default]
    Snap,
}

impl fmt::Display for ZoneMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZoneMode::Strict => "strict",
            ZoneMode::Snap => "snap",
        })
    }
}

impl std::str::FromStr for ZoneMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(ZoneMode::Strict),
            "snap" => Ok(ZoneMode::Snap),
            other => Err(format!(
                "unknown zone mode {other:?} (expected strict or snap)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    /// `core`, then `z2`, `z3`, ...
    pub name: String,
    pub doc_ids: Vec<String>,
    pub doc_count: usize,
    pub source_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZonePartition {
    pub zones: Vec<Zone>,
    pub mode: ZoneMode,
    /// Set when at least one zone came out empty.
    pub degenerate: bool,
}

impl ZonePartition {
    pub fn core(&self) -> &Zone {
        &self.zones[0]
    }

    pub fn doc_counts(&self) -> Vec<usize> {
        self.zones.iter().map(|z| z.doc_count).collect()
    }

    pub fn source_counts(&self) -> Vec<usize> {
        self.zones.iter().map(|z| z.source_count).collect()
    }
}

pub fn zone_name(index: usize) -> String {
    if index == 0 {
        "core".to_string()
    } else {
        format!("z{}", index + 1)
    }
}

pub fn partition_zones(
    ranking: &BradfordizedRanking,
    num_zones: usize,
    mode: ZoneMode,
) -> Result<ZonePartition, ZoneError> {
    if num_zones < 2 {
        return Err(ZoneError::TooFewZones(num_zones));
    }
    if ranking.is_empty() {
        return Err(ZoneError::EmptyRanking);
    }
    let cuts = match mode {
        ZoneMode::Strict => strict_boundaries(ranking.len(), num_zones),
        ZoneMode::Snap => snap_boundaries(&ranking.block_sizes(), num_zones),
    };

    let mut zones = Vec::with_capacity(num_zones);
    let mut start = 0;
    for (idx, &end) in cuts
        .iter()
        .chain(std::iter::once(&ranking.len()))
        .enumerate()
    {
        let slice = &ranking.entries[start..end];
        let source_count = slice
            .iter()
            .enumerate()
            .filter(|(i, e)| *i == 0 || slice[i - 1].source_rank != e.source_rank)
            .count();
        zones.push(Zone {
            name: zone_name(idx),
            doc_ids: slice.iter().map(|e| e.doc_id.clone()).collect(),
            doc_count: slice.len(),
            source_count,
        });
        start = end;
    }
    let degenerate = zones.iter().any(|z| z.doc_count == 0);
    Ok(ZonePartition {
        zones,
        mode,
        degenerate,
    })
}

/// Interior cut positions (k - 1 of them) for equal-size zones, larger zones first.
pub fn strict_boundaries(total: usize, num_zones: usize) -> Vec<usize> {
    let base = total / num_zones;
    let extra = total % num_zones;
    let mut cuts = Vec::with_capacity(num_zones - 1);
    let mut at = 0;
    for i in 0..num_zones - 1 {
        at += base + usize::from(i < extra);
        cuts.push(at);
    }
    cuts
}

/// Interior cut positions snapped to block edges.
///
/// With at least `num_zones` blocks, picks strictly increasing interior block
/// edges minimizing the summed distance to the ideal cuts `i * N / k`, taking
/// the lexicographically smallest cut vector among optima. With fewer blocks,
/// each block gets its own zone and the trailing zones stay empty.
pub fn snap_boundaries(block_sizes: &[usize], num_zones: usize) -> Vec<usize> {
    let total: usize = block_sizes.iter().sum();
    let edges: Vec<usize> = block_sizes
        .iter()
        .scan(0, |acc, &s| {
            *acc += s;
            Some(*acc)
        })
        .take(block_sizes.len().saturating_sub(1))
        .collect();
    let needed = num_zones - 1;
    if edges.len() < needed {
        let mut cuts = edges;
        cuts.resize(needed, total);
        return cuts;
    }

    // Deviation scaled by k so it stays integral: |k * edge - i * N|.
    let cost = |cut: usize, edge: usize| -> u128 {
        let a = (num_zones * edge) as u128;
        let b = ((cut + 1) * total) as u128;
        a.abs_diff(b)
    };

    // best[i][j]: minimal cost of cuts i.. when cut i sits on edge j.
    let m = edges.len();
    let inf = u128::MAX;
    let mut best = vec![vec![inf; m]; needed];
    for j in 0..m {
        best[needed - 1][j] = cost(needed - 1, edges[j]);
    }
    for i in (0..needed - 1).rev() {
        // Minimum of best[i + 1][j'] over j' > j, built right to left.
        let mut tail = inf;
        for j in (0..m).rev() {
            if tail != inf {
                best[i][j] = cost(i, edges[j]) + tail;
            }
            tail = tail.min(best[i + 1][j]);
        }
    }

    let mut cuts = Vec::with_capacity(needed);
    let mut target = *best[0].iter().min().expect("at least one edge");
    let mut from = 0;
    for (i, row) in best.iter().enumerate() {
        let j = (from..m)
            .find(|&j| row[j] == target)
            .expect("optimal path exists");
        cuts.push(edges[j]);
        target -= cost(i, edges[j]);
        from = j + 1;
    }
    cuts
}

/// The nucleus: core zone ids in ranking order.
pub fn core_documents(partition: &ZonePartition) -> Vec<String> {
    partition
        .zones
        .first()
        .map(|z| z.doc_ids.clone())
        .unwrap_or_default()
}
