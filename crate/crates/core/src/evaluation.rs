//! Label-based quality: point-adjusted best F1 and the paired one-sided
//! Wilcoxon signed-rank test used to compare selection strategies.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Dataset, ModelOutput};
use crate::stats::{average_ranks, normal_sf};

/// Best adjusted F1 over all thresholds, with precision and recall at the
/// chosen threshold. Predictions are `score > best_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub best_f1: f64,
    pub best_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    /// Labels held no anomaly; `best_f1` is 0 by convention.
    pub degenerate: bool,
}

/// How per-series results combine into a dataset score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Unweighted mean of per-series best F1.
    #[default]
    PerSeries,
    /// One threshold sweep over all points of all series.
    Pooled,
}

/// Expands every hit inside a labeled anomalous run to the whole run.
pub fn point_adjust(predicted: &[u8], labels: &[u8]) -> Result<Vec<u8>> {
    if predicted.len() != labels.len() {
        return Err(Error::invalid(format!(
            "point_adjust: {} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let mut out = predicted.to_vec();
    for (start, end) in label_runs(labels) {
        if predicted[start..end].contains(&1) {
            out[start..end].iter_mut().for_each(|p| *p = 1);
        }
    }
    Ok(out)
}

/// Maximal runs of 1s as half-open `[start, end)` ranges.
pub fn label_runs(labels: &[u8]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut t = 0;
    while t < labels.len() {
        if labels[t] == 1 {
            let start = t;
            while t < labels.len() && labels[t] == 1 {
                t += 1;
            }
            runs.push((start, t));
        } else {
            t += 1;
        }
    }
    runs
}

/// Adjusted best F1 of `scores` against `labels`.
///
/// Thresholds range over `-inf` (everything predicted) and every distinct
/// score; F1 is piecewise constant between them so the sweep is exact. Equal
/// F1 values resolve to the lowest threshold.
pub fn adjusted_best_f1(scores: &[f64], labels: &[u8]) -> Result<EvalResult> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "adjusted_best_f1: {} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    sweep(&[(scores, labels)])
}

/// Best F1 of one threshold shared by several (scores, labels) pairs.
pub fn pooled_best_f1(chunks: &[(&[f64], &[u8])]) -> Result<EvalResult> {
    for (s, l) in chunks {
        if s.len() != l.len() {
            return Err(Error::invalid(format!(
                "pooled_best_f1: {} scores for {} labels",
                s.len(),
                l.len()
            )));
        }
    }
    sweep(chunks)
}

/// F1 from confusion counts; 0 when nothing is predicted and nothing found.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if tp == 0 || denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

fn sweep(chunks: &[(&[f64], &[u8])]) -> Result<EvalResult> {
    // Flatten, tagging each point with its anomalous-run id (runs never
    // cross chunk boundaries).
    let mut points: Vec<(f64, Option<usize>)> = Vec::new();
    let mut run_len: Vec<usize> = Vec::new();
    for (scores, labels) in chunks {
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite score {s}")));
        }
        let mut run_of = vec![None; labels.len()];
        for (start, end) in label_runs(labels) {
            for r in run_of.iter_mut().take(end).skip(start) {
                *r = Some(run_len.len());
            }
            run_len.push(end - start);
        }
        points.extend(scores.iter().copied().zip(run_of));
    }
    let total_pos: usize = run_len.iter().sum();
    let max_score = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if total_pos == 0 {
        return Ok(EvalResult {
            best_f1: 0.0,
            best_threshold: if points.is_empty() { 0.0 } else { max_score },
            precision: 0.0,
            recall: 0.0,
            degenerate: true,
        });
    }

    // Descending score order; lowering the threshold past a score value
    // flips every point holding that value to "predicted".
    points.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut hit = vec![false; run_len.len()];
    let (mut tp, mut fp) = (0usize, 0usize);
    // Threshold equal to the max score predicts nothing: F1 = 0.
    let mut best = (0usize, 0usize, max_score);
    let mut i = 0;
    while i < points.len() {
        let v = points[i].0;
        while i < points.len() && points[i].0 == v {
            match points[i].1 {
                Some(r) if !hit[r] => {
                    hit[r] = true;
                    tp += run_len[r];
                }
                Some(_) => {}
                None => fp += 1,
            }
            i += 1;
        }
        // Points with score >= v are now predicted: the threshold is the next
        // lower distinct score, or -inf once every point is in.
        let threshold = if i < points.len() {
            points[i].0
        } else {
            f64::NEG_INFINITY
        };
        if better_or_equal(tp, fp, total_pos - tp, best.0, best.1, total_pos - best.0) {
            best = (tp, fp, threshold);
        }
    }
    let (tp, fp, threshold) = best;
    Ok(EvalResult {
        best_f1: f1_from_counts(tp, fp, total_pos - tp),
        best_threshold: threshold,
        precision: if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        },
        recall: tp as f64 / total_pos as f64,
        degenerate: false,
    })
}

/// Exact comparison of `2tp / (2tp + fp + fn)` without rounding.
fn better_or_equal(tp: usize, fp: usize, fn_: usize, btp: usize, bfp: usize, bfn: usize) -> bool {
    let lhs = (2 * tp) as u128 * (2 * btp + bfp + bfn) as u128;
    let rhs = (2 * btp) as u128 * (2 * tp + fp + fn_) as u128;
    lhs.cmp(&rhs) != Ordering::Less
}

/// Test-segment labels of every series, or an error naming the first
/// unlabeled one.
fn labels_for<'a>(
    dataset: &'a Dataset,
    outputs: &'a [ModelOutput],
) -> Result<Vec<(&'a [f64], &'a [u8])>> {
    dataset
        .series
        .iter()
        .map(|s| {
            let out = outputs
                .iter()
                .find(|o| o.series_id == s.id)
                .ok_or_else(|| Error::missing(format!("model output for series '{}'", s.id)))?;
            out.validate_against(s)?;
            let labels = s
                .test_labels()
                .ok_or_else(|| Error::missing(format!("labels for series '{}'", s.id)))?;
            Ok((out.scores.as_slice(), labels))
        })
        .collect()
}

/// Dataset-level quality of one model: mean per-series adjusted best F1, or a
/// single pooled sweep.
pub fn dataset_quality(
    outputs: &[ModelOutput],
    dataset: &Dataset,
    pooling: Pooling,
) -> Result<f64> {
    let chunks = labels_for(dataset, outputs)?;
    match pooling {
        Pooling::PerSeries => {
            let mut total = 0.0;
            for (s, l) in &chunks {
                total += sweep(&[(s, l)])?.best_f1;
            }
            Ok(total / chunks.len() as f64)
        }
        Pooling::Pooled => Ok(sweep(&chunks)?.best_f1),
    }
}

/// One-sided paired Wilcoxon signed-rank test of `H1: a > b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences (`W+`).
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Largest sample size that uses the exact null distribution.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

pub fn wilcoxon_one_sided(a: &[f64], b: &[f64], alpha: f64) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "wilcoxon: {} vs {} paired samples",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("wilcoxon: no paired samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("wilcoxon: non-finite sample"));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            significant: false,
            n: 0,
            exact: true,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    let (p_value, exact) = if n <= WILCOXON_EXACT_MAX_N {
        (exact_upper_tail(&ranks, w_plus), true)
    } else {
        (normal_upper_tail(&abs, &ranks, w_plus), false)
    };
    Ok(WilcoxonResult {
        statistic: w_plus,
        p_value,
        significant: p_value <= alpha,
        n,
        exact,
    })
}

/// `P(W+ >= observed)` over all `2^n` equally likely sign assignments.
///
/// Average ranks are multiples of 1/2, so doubled ranks are integers and the
/// null distribution is a subset-sum count.
fn exact_upper_tail(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let observed = (w_plus * 2.0).round() as usize;
    let tail: u64 = counts[observed..].iter().sum();
    tail as f64 / (1u64 << ranks.len()) as f64
}

/// Normal approximation with tie correction and continuity correction.
fn normal_upper_tail(abs: &[f64], ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return if w_plus > mean { 0.0 } else { 1.0 };
    }
    normal_sf((w_plus - mean - 0.5) / var.sqrt())
}
