//! Drift and comparison statistics: population stability index, Wilcoxon
//! signed-rank test, and competitive-ratio summaries.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const PSI_EPSILON: f64 = 1e-6;
pub const PSI_DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftClass {
    Stable,
    Minor,
    Major,
}

impl DriftClass {
    pub fn from_psi(psi: f64) -> Self {
        if psi < 0.1 {
            DriftClass::Stable
        } else if psi < 0.25 {
            DriftClass::Minor
        } else {
            DriftClass::Major
        }
    }
}

impl fmt::Display for DriftClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriftClass::Stable => "stable",
            DriftClass::Minor => "minor",
            DriftClass::Major => "major",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiResult {
    pub value: f64,
    pub class: DriftClass,
    /// Inner bin edges; the outer bins are unbounded.
    pub edges: Vec<f64>,
    pub expected: Vec<f64>,
    pub actual: Vec<f64>,
}

/// PSI of two binned distributions given as proportions.
pub fn psi_binned(expected: &[f64], actual: &[f64]) -> Result<f64> {
    if expected.len() != actual.len() || expected.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "binned distributions must be nonempty and of equal length ({} vs {})",
            expected.len(),
            actual.len()
        )));
    }
    if expected.iter().chain(actual).any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter("bin proportions must be finite and nonnegative".into()));
    }
    Ok(expected
        .iter()
        .zip(actual)
        .map(|(&q, &p)| (p - q) * ((p + PSI_EPSILON) / (q + PSI_EPSILON)).ln())
        .sum())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn proportions(sample: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; edges.len() + 1];
    for &x in sample {
        counts[edges.partition_point(|&e| e < x)] += 1;
    }
    let n = sample.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// PSI between raw samples, binned at the quantiles of `expected`. A value
/// lands in the first bin whose upper edge is at least the value.
pub fn psi(expected: &[f64], actual: &[f64], n_bins: usize) -> Result<PsiResult> {
    if expected.is_empty() || actual.is_empty() {
        return Err(Error::InvalidParameter("PSI needs two nonempty samples".into()));
    }
    if n_bins < 2 {
        return Err(Error::InvalidParameter("PSI needs at least two bins".into()));
    }
    if expected.iter().chain(actual).any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("PSI samples must be finite".into()));
    }
    let mut sorted = expected.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..n_bins)
        .map(|i| quantile(&sorted, i as f64 / n_bins as f64))
        .collect();
    let e = proportions(expected, &edges);
    let a = proportions(actual, &edges);
    let value = psi_binned(&e, &a)?;
    Ok(PsiResult {
        value,
        class: DriftClass::from_psi(value),
        edges,
        expected: e,
        actual: a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Number of nonzero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

pub const WILCOXON_EXACT_MAX: usize = 25;

/// Average ranks of `values` (1-based); equal values share their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank test on paired samples `x - y`.
///
/// Zero differences are dropped and tied magnitudes get average ranks. Up to
/// 25 nonzero differences the null distribution is enumerated exactly;
/// beyond that a tie-corrected normal approximation with continuity
/// correction is used.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "paired samples differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 5 {
        return Err(Error::InvalidParameter(
            "the signed-rank test needs at least 5 pairs".into(),
        ));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            method: WilcoxonMethod::Degenerate,
        });
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&mags);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let (p, method) = if n <= WILCOXON_EXACT_MAX {
        (exact_p(&ranks, w_plus), WilcoxonMethod::Exact)
    } else {
        (normal_p(&mags, n, w_plus), WilcoxonMethod::Normal)
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        p_value: p.min(1.0),
        method,
    })
}

/// Exact two-sided p-value by counting sign assignments. Average ranks are
/// half-integers, so the sums are tracked in doubled units.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total: f64 = counts.iter().sum();
    let w = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    2.0 * lower.min(upper)
}

fn normal_p(mags: &[f64], n: usize, w_plus: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = mags.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let norm = Normal::standard();
    2.0 * (1.0 - norm.cdf(z))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Ratio of mean algorithm value to mean benchmark value over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub n: usize,
    pub mean_alg: f64,
    pub mean_opt: f64,
    pub ratio: f64,
    /// Delta-method standard error of `ratio`; zero when `n < 2`.
    pub se: f64,
    pub std_alg: f64,
}

pub fn competitive_ratio(alg: &[f64], opt: &[f64]) -> Result<RatioSummary> {
    if alg.len() != opt.len() || alg.is_empty() {
        return Err(Error::InvalidParameter(
            "algorithm and benchmark totals must be nonempty and paired".into(),
        ));
    }
    let n = alg.len();
    let ma = mean(alg);
    let mo = mean(opt);
    if mo <= 0.0 {
        return Err(Error::Undefined("benchmark value is zero".into()));
    }
    let ratio = ma / mo;
    let se = if n < 2 {
        0.0
    } else {
        let nf = n as f64;
        let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64| {
            a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (nf - 1.0)
        };
        let va = cov(alg, ma, alg, ma);
        let vo = cov(opt, mo, opt, mo);
        let cao = cov(alg, ma, opt, mo);
        ((va - 2.0 * ratio * cao + ratio * ratio * vo).max(0.0) / nf).sqrt() / mo
    };
    Ok(RatioSummary {
        n,
        mean_alg: ma,
        mean_opt: mo,
        ratio,
        se,
        std_alg: std_dev(alg),
    })
}
