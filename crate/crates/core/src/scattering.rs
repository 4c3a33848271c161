//! Bradford scattering statistics: cumulative curves, zone source counts and
//! the zone-to-zone multiplier.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bradfordizer::{BradfordizedRanking, ZonePartition};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScatteringError {
    #[error("ranking is empty")]
    EmptyRanking,
    #[error("partition has empty zones ({sources} sources for {zones} zones)")]
    DegeneratePartition { sources: usize, zones: usize },
    #[error("partition covers {partition} documents but the ranking has {ranking}")]
    PartitionMismatch { partition: usize, ranking: usize },
    #[error("no profiles to aggregate")]
    NoProfiles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rank: usize,
    pub cumulative: usize,
}

/// Estimates of n in the 1 : n : n^2 source-count progression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    /// (last / first)^(1 / (k - 1)); the square root of j3/j1 for three zones.
    pub outer_root: Option<f64>,
    /// j(i+1) / j(i) for consecutive zones.
    pub adjacent: Vec<Option<f64>>,
}

pub fn bradford_multipliers(zone_source_counts: &[f64]) -> Multipliers {
    let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
    let outer_root = match zone_source_counts {
        [first, .., last] => {
            ratio(*last, *first).map(|r| r.powf(1.0 / (zone_source_counts.len() - 1) as f64))
        }
        _ => None,
    };
    Multipliers {
        outer_root,
        adjacent: zone_source_counts
            .windows(2)
            .map(|w| ratio(w[1], w[0]))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringProfile {
    pub points: Vec<CurvePoint>,
    pub zone_source_counts: Vec<usize>,
    pub total_sources: usize,
    pub total_docs: usize,
    pub multipliers: Multipliers,
}

pub fn scattering_profile(
    ranking: &BradfordizedRanking,
    partition: &ZonePartition,
) -> Result<ScatteringProfile, ScatteringError> {
    if ranking.is_empty() {
        return Err(ScatteringError::EmptyRanking);
    }
    let covered: usize = partition.doc_counts().iter().sum();
    if covered != ranking.len() {
        return Err(ScatteringError::PartitionMismatch {
            partition: covered,
            ranking: ranking.len(),
        });
    }
    if partition.degenerate {
        return Err(ScatteringError::DegeneratePartition {
            sources: ranking.sources.len(),
            zones: partition.zones.len(),
        });
    }
    let points = ranking
        .sources
        .iter()
        .scan(0, |acc, s| {
            *acc += s.productivity;
            Some(CurvePoint {
                rank: s.rank,
                cumulative: *acc,
            })
        })
        .collect();
    let zone_source_counts = partition.source_counts();
    let as_f64: Vec<f64> = zone_source_counts.iter().map(|&c| c as f64).collect();
    Ok(ScatteringProfile {
        points,
        multipliers: bradford_multipliers(&as_f64),
        zone_source_counts,
        total_sources: ranking.sources.len(),
        total_docs: ranking.len(),
    })
}

/// The cumulative curve in base-10 log coordinates.
pub fn loglog_points(profile: &ScatteringProfile) -> Vec<(f64, f64)> {
    profile
        .points
        .iter()
        .map(|p| ((p.rank as f64).log10(), (p.cumulative as f64).log10()))
        .collect()
}

/// Plot data with header `rank,cumulative,log10_rank,log10_cumulative`.
pub fn plot_csv(profile: &ScatteringProfile) -> String {
    let mut out = String::from("rank,cumulative,log10_rank,log10_cumulative\n");
    for (p, (lx, ly)) in profile.points.iter().zip(loglog_points(profile)) {
        let _ = writeln!(out, "{},{},{:.6},{:.6}", p.rank, p.cumulative, lx, ly);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSummary {
    pub topics: usize,
    pub mean_total_docs: f64,
    pub mean_total_sources: f64,
    pub mean_zone_source_counts: Vec<f64>,
    /// Multipliers computed from the mean zone source counts.
    pub multipliers: Multipliers,
}

pub fn aggregate_profiles(
    profiles: &[ScatteringProfile],
) -> Result<ScatteringSummary, ScatteringError> {
    if profiles.is_empty() {
        return Err(ScatteringError::NoProfiles);
    }
    let n = profiles.len() as f64;
    let k = profiles
        .iter()
        .map(|p| p.zone_source_counts.len())
        .max()
        .unwrap_or(0);
    let mean_zone_source_counts: Vec<f64> = (0..k)
        .map(|i| {
            profiles
                .iter()
                .map(|p| p.zone_source_counts.get(i).copied().unwrap_or(0) as f64)
                .sum::<f64>()
                / n
        })
        .collect();
    Ok(ScatteringSummary {
        topics: profiles.len(),
        mean_total_docs: profiles.iter().map(|p| p.total_docs as f64).sum::<f64>() / n,
        mean_total_sources: profiles.iter().map(|p| p.total_sources as f64).sum::<f64>() / n,
        multipliers: bradford_multipliers(&mean_zone_source_counts),
        mean_zone_source_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bradfordizer::{bradfordize, partition_zones, ZoneMode};
    use crate::corpus::{DocType, Document, KeyMode};
    use proptest::prelude::*;

    fn ranking(sizes: &[usize]) -> BradfordizedRanking {
        let docs: Vec<Document> = sizes
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| {
                (0..n).map(move |i| {
                    Document::new(format!("{j:03}-{i:04}"), DocType::JournalArticle)
                        .with_source(format!("J{j:03}"))
                })
            })
            .collect();
        bradfordize(&docs, KeyMode::Journal)
    }

    fn profile(sizes: &[usize]) -> Result<ScatteringProfile, ScatteringError> {
        let r = ranking(sizes);
        let p = partition_zones(&r, 3, ZoneMode::Snap).unwrap();
        scattering_profile(&r, &p)
    }

    #[test]
    fn hand_countable_blocks() {
        let p = profile(&[3, 2, 1]).unwrap();
        let pts: Vec<(usize, usize)> = p.points.iter().map(|c| (c.rank, c.cumulative)).collect();
        assert_eq!(pts, [(1, 3), (2, 5), (3, 6)]);
        assert_eq!(p.zone_source_counts, [1, 1, 1]);
        assert_eq!(p.multipliers.outer_root, Some(1.0));
        assert_eq!((p.total_docs, p.total_sources), (6, 3));
    }

    #[test]
    fn single_source_cannot_fill_three_zones() {
        assert_eq!(
            profile(&[4]),
            Err(ScatteringError::DegeneratePartition {
                sources: 1,
                zones: 3
            })
        );
        let empty = BradfordizedRanking::default();
        let p = partition_zones(&ranking(&[1, 1, 1]), 3, ZoneMode::Snap).unwrap();
        assert_eq!(
            scattering_profile(&empty, &p),
            Err(ScatteringError::EmptyRanking)
        );
    }

    #[test]
    fn multiplier_from_mean_zone_counts() {
        let m = bradford_multipliers(&[4.64, 17.24, 39.56]);
        // sqrt(39.56 / 4.64) = 2.9199..., 17.24 / 4.64 = 3.7155...
        assert!((m.outer_root.unwrap() - (39.56f64 / 4.64).sqrt()).abs() < 1e-12);
        assert!((m.outer_root.unwrap() - 2.92).abs() < 0.005);
        assert!((m.adjacent[0].unwrap() - 3.72).abs() < 0.005);
        assert!((m.adjacent[1].unwrap() - 39.56 / 17.24).abs() < 1e-12);
        let zero = bradford_multipliers(&[0.0, 2.0, 4.0]);
        assert_eq!(zero.outer_root, None);
        assert_eq!(zero.adjacent, [None, Some(2.0)]);
    }

    #[test]
    fn loglog_values() {
        let p = ScatteringProfile {
            points: vec![
                CurvePoint {
                    rank: 1,
                    cumulative: 3,
                },
                CurvePoint {
                    rank: 10,
                    cumulative: 100,
                },
            ],
            zone_source_counts: vec![1, 1, 0],
            total_sources: 10,
            total_docs: 100,
            multipliers: bradford_multipliers(&[1.0, 1.0, 0.0]),
        };
        let ll = loglog_points(&p);
        assert_eq!(ll[0], (0.0, 3f64.log10()));
        assert_eq!(ll[1], (1.0, 2.0));
    }

    #[test]
    fn csv_layout() {
        let csv = plot_csv(&profile(&[3, 2, 1]).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "rank,cumulative,log10_rank,log10_cumulative");
        assert_eq!(lines[1], "1,3,0.000000,0.477121");
        assert_eq!(lines[3], "3,6,0.477121,0.778151");
    }

    #[test]
    fn aggregate_means() {
        let a = profile(&[50, 20, 10, 10, 5, 5]).unwrap();
        let b = profile(&[84, 40, 30, 20, 10]).unwrap();
        assert_eq!((a.total_docs, b.total_docs), (100, 184));
        let s = aggregate_profiles(&[a.clone(), b]).unwrap();
        assert_eq!(s.mean_total_docs, 142.0);
        let one = aggregate_profiles(std::slice::from_ref(&a)).unwrap();
        assert_eq!(one.mean_total_docs, 100.0);
        assert_eq!(one.mean_total_sources, 6.0);
        assert_eq!(one.mean_zone_source_counts, [1.0, 1.0, 4.0]);
        assert_eq!(aggregate_profiles(&[]), Err(ScatteringError::NoProfiles));
    }

    proptest! {
        #[test]
        fn curve_is_concave_and_complete(mut sizes in prop::collection::vec(1usize..40, 3..50)) {
            sizes.sort_unstable_by(|a, b| b.cmp(a));
            let p = profile(&sizes);
            prop_assume!(p.is_ok());
            let p = p.unwrap();
            prop_assert_eq!(p.points.len(), p.total_sources);
            prop_assert_eq!(p.points.last().unwrap().cumulative, p.total_docs);
            for w in p.points.windows(2) {
                prop_assert!(w[0].rank < w[1].rank && w[0].cumulative < w[1].cumulative);
            }
            let steps: Vec<usize> = std::iter::once(p.points[0].cumulative)
                .chain(p.points.windows(2).map(|w| w[1].cumulative - w[0].cumulative))
                .collect();
            for w in steps.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            let ll = loglog_points(&p);
            for w in ll.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
            let c = &p.zone_source_counts;
            if c[0] <= c[1] && c[1] <= c[2] {
                prop_assert!(p.multipliers.outer_root.unwrap() >= 1.0);
            }
        }
    }
}
