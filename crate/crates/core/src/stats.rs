//! Paired significance tests: Wilcoxon signed-rank and Student's paired t-test.
//!
//! Both tests are two-sided and take `(a, b)` pairs; differences are `a - b`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `n_effective` handled by the exact Wilcoxon distribution in `Auto` mode.
pub const EXACT_WILCOXON_MAX_N: usize = 20;

/// Relative tolerance of the incomplete beta continued fraction.
const BETA_CF_TOLERANCE: f64 = 1e-12;
const BETA_CF_MAX_ITER: usize = 10_000;

/// |d| values closer than this (relative) share a tie group.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("all differences are zero; the test carries no information")]
    NoInformation,
    #[error("need at least {needed} pairs, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("differences have zero variance")]
    DegenerateVariance,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("non-finite value in input pairs")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    WilcoxonExact,
    WilcoxonNormal,
    PairedT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    /// W+ for Wilcoxon, t for the paired t-test.
    pub statistic: f64,
    pub p_value: f64,
    /// Pairs used after dropping zero differences.
    pub n_effective: usize,
    pub zeros_dropped: usize,
    pub alpha: f64,
    pub significant: bool,
}

impl TestResult {
    fn new(
        method: TestMethod,
        statistic: f64,
        p_value: f64,
        n_effective: usize,
        zeros_dropped: usize,
        alpha: f64,
    ) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            method,
            statistic,
            p_value,
            n_effective,
            zeros_dropped,
            alpha,
            significant: p_value < alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WilcoxonMethod {
    /// Exact up to [`EXACT_WILCOXON_MAX_N`] pairs, normal approximation above.
    #[default]
    Auto,
    Exact,
    Normal,
}

fn check_inputs(pairs: &[(f64, f64)], alpha: f64) -> Result<(), StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)], alpha: f64) -> Result<TestResult, StatsError> {
    wilcoxon_signed_rank_with(pairs, alpha, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(
    pairs: &[(f64, f64)],
    alpha: f64,
    method: WilcoxonMethod,
) -> Result<TestResult, StatsError> {
    check_inputs(pairs, alpha)?;
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let zeros_dropped = pairs.len() - diffs.len();
    let n = diffs.len();
    if n == 0 {
        return Err(StatsError::NoInformation);
    }

    let ranked = SignedRanks::new(&diffs);
    let exact = match method {
        WilcoxonMethod::Auto => n <= EXACT_WILCOXON_MAX_N,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let w_plus = ranked.w_plus_doubled as f64 / 2.0;
    let result = if exact {
        let p = exact_two_sided_p(&ranked.doubled_ranks, ranked.w_plus_doubled);
        TestResult::new(
            TestMethod::WilcoxonExact,
            w_plus,
            p,
            n,
            zeros_dropped,
            alpha,
        )
    } else {
        let p = normal_two_sided_p(n, w_plus, &ranked.tie_sizes);
        TestResult::new(
            TestMethod::WilcoxonNormal,
            w_plus,
            p,
            n,
            zeros_dropped,
            alpha,
        )
    };
    Ok(result)
}

/// Ranks of |d| with ties averaged, kept doubled so they stay integral.
struct SignedRanks {
    doubled_ranks: Vec<u64>,
    w_plus_doubled: u64,
    tie_sizes: Vec<usize>,
}

impl SignedRanks {
    fn new(diffs: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..diffs.len()).collect();
        order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));

        let mut doubled = vec![0u64; diffs.len()];
        let mut tie_sizes = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let anchor = diffs[order[start]].abs();
            let mut end = start + 1;
            while end < order.len() && diffs[order[end]].abs() - anchor <= TIE_TOLERANCE * anchor {
                end += 1;
            }
            // Positions start+1 ..= end share the average rank (start + 1 + end) / 2.
            let rank2 = (start + 1 + end) as u64;
            for &i in &order[start..end] {
                doubled[i] = rank2;
            }
            tie_sizes.push(end - start);
            start = end;
        }
        let w_plus_doubled = diffs
            .iter()
            .zip(&doubled)
            .filter(|(d, _)| **d > 0.0)
            .map(|(_, r)| *r)
            .sum();
        SignedRanks {
            doubled_ranks: doubled,
            w_plus_doubled,
            tie_sizes,
        }
    }
}

/// Exact null distribution of W+ over all 2^n sign assignments of the given
/// (doubled) ranks, as counts per doubled sum.
pub fn signed_rank_distribution(doubled_ranks: &[u64]) -> Vec<f64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0.0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    counts
}

fn exact_two_sided_p(doubled_ranks: &[u64], w_plus_doubled: u64) -> f64 {
    let counts = signed_rank_distribution(doubled_ranks);
    let w = w_plus_doubled as usize;
    let total: f64 = counts.iter().sum();
    let lower: f64 = counts[..=w].iter().sum();
    let upper: f64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_two_sided_p(n: usize, w_plus: f64, tie_sizes: &[usize]) -> f64 {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let centered = w_plus - mean;
    let correction = 0.5 * centered.signum() * f64::from(u8::from(centered != 0.0));
    let z = (centered - correction) / variance.sqrt();
    (2.0 * normal_cdf(-z.abs())).min(1.0)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn paired_t_test(pairs: &[(f64, f64)], alpha: f64) -> Result<TestResult, StatsError> {
    check_inputs(pairs, alpha)?;
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: n });
    }
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if sd <= 1e-12 * scale || sd == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let t = mean / (sd / nf.sqrt());
    let p = student_t_two_sided_p(t, nf - 1.0);
    let zeros = diffs.iter().filter(|d| **d == 0.0).count();
    Ok(TestResult::new(TestMethod::PairedT, t, p, n, zeros, alpha))
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5)
}

/// Regularized incomplete beta I_x(a, b) by continued fraction (modified Lentz).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fast for x below the mean; use symmetry above it.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // Even step.
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < BETA_CF_TOLERANCE {
            break;
        }
    }
    h
}
