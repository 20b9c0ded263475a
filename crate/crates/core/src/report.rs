//! Aggregation of run records: per-group summaries, the Wilcoxon
//! signed-rank test on paired per-problem values, and bootstrap estimates of
//! PAR10 under per-problem configuration resampling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::bench::{coverage, ipc_scores_by, median_record, par10, BenchError, RunRecord};
use crate::derive_seed;

/// Exact enumeration is used up to this many nonzero differences.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to summarize")]
    Empty,
    #[error("{0}")]
    Inconsistent(String),
    #[error("unknown table format `{0}` (expected csv, tsv or json)")]
    UnknownFormat(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    /// One row per (planner, variant).
    Variant,
    /// One row per planner; each problem must come from a single variant, as
    /// in per-instance randomized suites.
    Planner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsSummary {
    pub planner: String,
    pub variant: Option<String>,
    pub problems: usize,
    pub par10: f64,
    pub ipc_score: f64,
    pub coverage_count: usize,
    pub coverage_fraction: f64,
    /// PAR10 spread over the planner's variants (variant grouping only).
    pub best: Option<f64>,
    pub worst: Option<f64>,
    pub median: Option<f64>,
    pub stdev: Option<f64>,
}

fn common_cutoff(records: &[RunRecord]) -> Result<f64, ReportError> {
    let first = records.first().ok_or(ReportError::Empty)?.cutoff_seconds;
    if records.iter().any(|r| r.cutoff_seconds != first) {
        return Err(ReportError::Inconsistent("records use different cutoffs".into()));
    }
    Ok(first)
}

/// Median record per (planner, variant, problem), in key order.
fn medians(records: &[RunRecord]) -> Result<Vec<RunRecord>, ReportError> {
    let mut cells: BTreeMap<(&str, &str, &str), Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((&r.planner_id, &r.variant, &r.problem_id))
            .or_default()
            .push(r.clone());
    }
    cells
        .into_values()
        .map(|mut rs| {
            rs.sort_by_key(|r| r.run_index);
            median_record(&rs).map_err(ReportError::from)
        })
        .collect()
}

/// Median of a sample, averaging the middle pair for even sizes.
fn median_of(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile of an unsorted sample.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn population_stdev(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

pub fn summarize(records: &[RunRecord], group_by: GroupBy) -> Result<Vec<MetricsSummary>, ReportError> {
    let cutoff = common_cutoff(records)?;
    let medians = medians(records)?;
    let key = |r: &RunRecord| match group_by {
        GroupBy::Variant => (r.planner_id.clone(), Some(r.variant.clone())),
        GroupBy::Planner => (r.planner_id.clone(), None),
    };
    if group_by == GroupBy::Planner {
        let mut seen = BTreeSet::new();
        for r in &medians {
            if !seen.insert((&r.planner_id, &r.problem_id)) {
                return Err(ReportError::Inconsistent(format!(
                    "planner `{}` has several variants on problem `{}`; group by variant",
                    r.planner_id, r.problem_id
                )));
            }
        }
    }
    let ipc = ipc_scores_by(&medians, key)?;
    let mut groups: BTreeMap<(String, Option<String>), Vec<RunRecord>> = BTreeMap::new();
    for r in medians {
        groups.entry(key(&r)).or_default().push(r);
    }
    let mut rows = Vec::new();
    for ((planner, variant), rs) in &groups {
        let cov = coverage(rs);
        rows.push(MetricsSummary {
            planner: planner.clone(),
            variant: variant.clone(),
            problems: rs.len(),
            par10: par10(rs, cutoff)?,
            ipc_score: ipc[&(planner.clone(), variant.clone())],
            coverage_count: cov.solved,
            coverage_fraction: cov.fraction,
            best: None,
            worst: None,
            median: None,
            stdev: None,
        });
    }
    if group_by == GroupBy::Variant {
        let mut by_planner: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for row in &rows {
            by_planner.entry(row.planner.clone()).or_default().push(row.par10);
        }
        for row in &mut rows {
            let values = &by_planner[&row.planner];
            row.best = values.iter().copied().min_by(f64::total_cmp);
            row.worst = values.iter().copied().max_by(f64::total_cmp);
            row.median = Some(median_of(values));
            row.stdev = Some(population_stdev(values));
        }
    }
    Ok(rows)
}

/// Sum over domains of each planner's median PAR10 across variants. Each
/// entry of `per_domain` is a variant-grouped summary of one domain.
pub fn cumulative_median(per_domain: &[Vec<MetricsSummary>]) -> Result<BTreeMap<String, f64>, ReportError> {
    let mut total: BTreeMap<String, f64> = BTreeMap::new();
    for domain in per_domain {
        let mut seen = BTreeSet::new();
        for row in domain {
            if seen.insert(&row.planner) {
                let m = row.median.ok_or_else(|| {
                    ReportError::Inconsistent("cumulative median needs variant-grouped summaries".into())
                })?;
                *total.entry(row.planner.clone()).or_default() += m;
            }
        }
    }
    if total.is_empty() {
        return Err(ReportError::Empty);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairedSample {
    pub label_a: String,
    pub label_b: String,
    /// (problem id, value under A, value under B).
    pub pairs: Vec<(String, f64, f64)>,
}

/// Pairs the penalized median times of two systems on the problems both
/// attempted. A system is a planner and optionally one of its variants;
/// without a variant the planner must have one variant per problem.
pub fn paired_par10(
    records: &[RunRecord],
    a: (&str, Option<&str>),
    b: (&str, Option<&str>),
) -> Result<PairedSample, ReportError> {
    let medians = medians(records)?;
    let pick = |(planner, variant): (&str, Option<&str>)| -> Result<BTreeMap<String, f64>, ReportError> {
        let mut out = BTreeMap::new();
        for r in medians
            .iter()
            .filter(|r| r.planner_id == planner && variant.is_none_or(|v| r.variant == v))
        {
            if out.insert(r.problem_id.clone(), r.penalized_time()).is_some() {
                return Err(ReportError::Inconsistent(format!(
                    "planner `{planner}` has several variants on problem `{}`; name a variant",
                    r.problem_id
                )));
            }
        }
        Ok(out)
    };
    let (va, vb) = (pick(a)?, pick(b)?);
    let pairs: Vec<(String, f64, f64)> = va
        .iter()
        .filter_map(|(p, x)| vb.get(p).map(|y| (p.clone(), *x, *y)))
        .collect();
    if pairs.is_empty() {
        return Err(ReportError::Empty);
    }
    let label = |(planner, variant): (&str, Option<&str>)| match variant {
        Some(v) => format!("{planner}/{v}"),
        None => planner.to_string(),
    };
    Ok(PairedSample {
        label_a: label(a),
        label_b: label(b),
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Every difference was zero.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WilcoxonResult {
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// min(W+, W-).
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub significant: Option<bool>,
    pub method: WilcoxonMethod,
}

/// Average ranks of `|d|`, ties sharing the mean of their positions.
fn signed_ranks(diffs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..diffs.len()).collect();
    idx.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = vec![0.0; diffs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && diffs[idx[j + 1]].abs() == diffs[idx[i]].abs() {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided exact p-value: the share of the 2^n sign assignments whose
/// positive rank sum is at most `statistic`, doubled. Ranks are doubled so
/// that tied (half-integer) ranks count as integers.
fn exact_p(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut ways = vec![0f64; total + 1];
    ways[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            ways[s] += ways[s - r];
        }
    }
    let bound = (statistic * 2.0).round() as usize;
    let tail: f64 = ways[..=bound].iter().sum();
    (2.0 * tail / 2f64.powi(ranks.len() as i32)).min(1.0)
}

/// Normal approximation with tie and continuity corrections.
fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for r in ranks {
        *counts.entry(r.to_bits()).or_default() += 1.0;
    }
    let ties: f64 = counts.values().map(|t| t * t * t - t).sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - std.cdf(z))).min(1.0)
}

fn nonzero_differences(s: &PairedSample) -> Vec<f64> {
    s.pairs
        .iter()
        .map(|(_, a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect()
}

/// Two-sided Wilcoxon signed-rank test. Zero differences are dropped;
/// exact up to [`EXACT_LIMIT`] remaining pairs, normal approximation above.
pub fn wilcoxon_signed_rank(s: &PairedSample, alpha: f64) -> WilcoxonResult {
    let diffs = nonzero_differences(s);
    wilcoxon_with(&diffs, alpha, diffs.len() <= EXACT_LIMIT)
}

/// The test with the method forced, for comparing the two paths.
pub fn wilcoxon_with(diffs: &[f64], alpha: f64, exact: bool) -> WilcoxonResult {
    let diffs: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let ranks = signed_ranks(&diffs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d < 0.0).map(|(_, r)| r).sum();
    let statistic = w_plus.min(w_minus);
    if diffs.is_empty() {
        return WilcoxonResult {
            n: 0,
            w_plus,
            w_minus,
            statistic,
            p_value: None,
            significant: None,
            method: WilcoxonMethod::Inconclusive,
        };
    }
    let (p, method) = if exact {
        (exact_p(&ranks, statistic), WilcoxonMethod::Exact)
    } else {
        (normal_p(&ranks, w_plus), WilcoxonMethod::Normal)
    };
    WilcoxonResult {
        n: diffs.len(),
        w_plus,
        w_minus,
        statistic,
        p_value: Some(p),
        significant: Some(p < alpha),
        method,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BootstrapSummary {
    pub planner: String,
    pub resamples: usize,
    pub seed: u64,
    pub problems: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whiskers: String,
    pub resampling_unit: String,
}

/// Bootstrap distribution of PAR10 per planner. Each resample draws one of
/// the configurations run on each problem, uniformly with replacement.
/// Resample `i` uses its own seed derived from `(seed, i)`.
pub fn bootstrap_par10(
    records: &[RunRecord],
    resamples: usize,
    seed: u64,
) -> Result<Vec<BootstrapSummary>, ReportError> {
    use rayon::prelude::*;

    if resamples == 0 {
        return Err(ReportError::Empty);
    }
    let cutoff = common_cutoff(records)?;
    let medians = medians(records)?;
    // planner -> problem -> config digest -> penalized time
    let mut table: BTreeMap<&str, BTreeMap<&str, BTreeMap<(&str, &str), f64>>> = BTreeMap::new();
    for r in &medians {
        let value = if r.solved { r.time_seconds } else { 10.0 * cutoff };
        table
            .entry(&r.planner_id)
            .or_default()
            .entry(&r.problem_id)
            .or_default()
            .insert((&r.config_digest, &r.variant), value);
    }
    let mut out = Vec::new();
    for (planner, problems) in table {
        let options: Vec<Vec<f64>> = problems.values().map(|c| c.values().copied().collect()).collect();
        let values: Vec<f64> = (0..resamples)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("resample-{i}")));
                let total: f64 = options
                    .iter()
                    .map(|o| o[rng.random_range(0..o.len())])
                    .sum();
                total / options.len() as f64
            })
            .collect();
        out.push(BootstrapSummary {
            planner: planner.to_string(),
            resamples,
            seed,
            problems: options.len(),
            min: quantile(&values, 0.0),
            q1: quantile(&values, 0.25),
            median: quantile(&values, 0.5),
            q3: quantile(&values, 0.75),
            max: quantile(&values, 1.0),
            whiskers: "min-max".into(),
            resampling_unit: "one configuration per problem".into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    /// Long format, one row per (group, metric).
    Tsv,
    Json,
}

impl FromStr for TableFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "tsv" => Ok(TableFormat::Tsv),
            "json" => Ok(TableFormat::Json),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Csv => "csv",
            TableFormat::Tsv => "tsv",
            TableFormat::Json => "json",
        })
    }
}

const COLUMNS: [&str; 11] = [
    "planner",
    "variant",
    "problems",
    "par10",
    "ipc_score",
    "coverage_count",
    "coverage_fraction",
    "best",
    "worst",
    "median",
    "stdev",
];

fn cell(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default()
}

fn metric_cells(s: &MetricsSummary) -> [(&'static str, String); 9] {
    [
        ("problems", s.problems.to_string()),
        ("par10", cell(Some(s.par10))),
        ("ipc_score", cell(Some(s.ipc_score))),
        ("coverage_count", s.coverage_count.to_string()),
        ("coverage_fraction", cell(Some(s.coverage_fraction))),
        ("best", cell(s.best)),
        ("worst", cell(s.worst)),
        ("median", cell(s.median)),
        ("stdev", cell(s.stdev)),
    ]
}

/// Renders summaries sorted by (planner, variant). Missing values are empty.
pub fn emit_tables(summaries: &[MetricsSummary], format: TableFormat) -> Result<String, ReportError> {
    if summaries.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut rows: Vec<&MetricsSummary> = summaries.iter().collect();
    rows.sort_by(|a, b| (&a.planner, &a.variant).cmp(&(&b.planner, &b.variant)));
    let write_err = |e: csv::Error| ReportError::Inconsistent(format!("table output: {e}"));
    match format {
        TableFormat::Json => Ok(serde_json::to_string_pretty(&rows).expect("summaries serialize") + "\n"),
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS).map_err(write_err)?;
            for s in rows {
                let mut rec = vec![s.planner.clone(), s.variant.clone().unwrap_or_default()];
                rec.extend(metric_cells(s).into_iter().map(|(_, v)| v));
                w.write_record(&rec).map_err(write_err)?;
            }
            let bytes = w.into_inner().map_err(|e| ReportError::Inconsistent(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        TableFormat::Tsv => {
            let mut w = csv::WriterBuilder::new()
                .delimiter(b'\t')
                .from_writer(Vec::new());
            w.write_record(["planner", "variant", "metric", "value"])
                .map_err(write_err)?;
            for s in rows {
                for (metric, value) in metric_cells(s) {
                    w.write_record([
                        s.planner.as_str(),
                        s.variant.as_deref().unwrap_or(""),
                        metric,
                        value.as_str(),
                    ])
                    .map_err(write_err)?;
                }
            }
            let bytes = w.into_inner().map_err(|e| ReportError::Inconsistent(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("tsv output is utf-8"))
        }
    }
}
