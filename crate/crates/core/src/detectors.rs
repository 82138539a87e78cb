//! Built-in detectors (moving average, k-NN over sliding windows) and
//! ingestion of externally produced score files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{list_files, read_score_file};
use crate::series::{Dataset, ModelOutput, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    MovingAverage,
    Knn,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub window: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    pub model_id: String,
}

fn default_k() -> usize {
    1
}

impl DetectorConfig {
    pub fn moving_average(window: usize) -> Self {
        DetectorConfig {
            kind: DetectorKind::MovingAverage,
            window,
            k: 1,
            model_id: format!("ma_h{window}"),
        }
    }

    pub fn knn(window: usize, k: usize) -> Self {
        DetectorConfig {
            kind: DetectorKind::Knn,
            window,
            k,
            model_id: format!("knn_h{window}_k{k}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config(format!(
                "detector '{}': window must be >= 1",
                self.model_id
            )));
        }
        if self.kind == DetectorKind::Knn && self.k == 0 {
            return Err(Error::Config(format!(
                "detector '{}': k must be >= 1",
                self.model_id
            )));
        }
        if self.model_id.is_empty() || self.model_id.contains("__") {
            return Err(Error::Config(format!(
                "invalid model id '{}'",
                self.model_id
            )));
        }
        Ok(())
    }

    /// Scores the test segment of `series`.
    pub fn score(&self, series: &TimeSeries) -> Result<ModelOutput> {
        self.validate()?;
        let mut out = match self.kind {
            DetectorKind::MovingAverage => moving_average_scores(series, self.window)?,
            DetectorKind::Knn => knn_scores(series, self.window, self.k)?,
            DetectorKind::External => {
                return Err(Error::invalid(format!(
                    "model '{}' is external; its scores must be ingested from files",
                    self.model_id
                )))
            }
        };
        out.model_id = self.model_id.clone();
        Ok(out)
    }
}

/// Four moving-average windows and three k-NN neighbour counts.
pub fn default_roster() -> Vec<DetectorConfig> {
    let mut roster: Vec<DetectorConfig> = [4, 8, 16, 32]
        .into_iter()
        .map(DetectorConfig::moving_average)
        .collect();
    roster.extend([1, 5, 10].into_iter().map(|k| DetectorConfig::knn(16, k)));
    roster
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared residual from the mean of the `window` preceding observations.
pub fn moving_average_scores(series: &TimeSeries, window: usize) -> Result<ModelOutput> {
    if window == 0 {
        return Err(Error::invalid("moving average window must be >= 1"));
    }
    if series.test_len() == 0 {
        return Err(Error::invalid(format!(
            "series '{}' has an empty test segment",
            series.id
        )));
    }
    let d = series.dim();
    let mut scores = Vec::with_capacity(series.test_len());
    let mut preds = Vec::with_capacity(series.test_len());
    for t in series.test_start()..series.len() {
        let past = &series.values[t.saturating_sub(window)..t];
        let forecast = if past.is_empty() {
            series.values[t].clone()
        } else {
            let mut f = vec![0.0; d];
            for row in past {
                for (acc, v) in f.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            f.iter_mut().for_each(|v| *v /= past.len() as f64);
            f
        };
        scores.push(sq_dist(&series.values[t], &forecast));
        preds.push(forecast);
    }
    Ok(ModelOutput {
        model_id: format!("ma_h{window}"),
        series_id: series.id.clone(),
        scores,
        predictions: Some(preds),
    })
}

fn flat_window(values: &[Vec<f64>], end: usize, h: usize) -> Vec<f64> {
    values[end + 1 - h..=end]
        .iter()
        .flatten()
        .copied()
        .collect()
}

/// Mean squared distance from `w` to its `k` nearest windows in `train`.
fn window_score(w: &[f64], train: &[Vec<f64>], k: usize, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(train.iter().map(|tw| sq_dist(w, tw)));
    scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
    let mut near = scratch[..k].to_vec();
    // fixed summation order so equal neighbour sets give bit-equal scores
    near.sort_by(f64::total_cmp);
    near.iter().sum::<f64>() / k as f64
}

/// Mean squared distance of each test window to its `k` nearest train windows.
pub fn knn_scores(series: &TimeSeries, window: usize, k: usize) -> Result<ModelOutput> {
    if window == 0 || k == 0 {
        return Err(Error::invalid("k-NN needs window >= 1 and k >= 1"));
    }
    let ts = series.test_start();
    let train_windows = (ts + 1).saturating_sub(window);
    if train_windows < k {
        return Err(Error::invalid(format!(
            "series '{}': k-NN with window {window} and k {k} needs a train segment of at least {} points, found {ts}",
            series.id,
            window + k - 1
        )));
    }
    if series.test_len() < window {
        return Err(Error::invalid(format!(
            "series '{}': test segment of {} points is shorter than window {window}",
            series.id,
            series.test_len()
        )));
    }
    let train: Vec<Vec<f64>> = (window - 1..ts)
        .map(|e| flat_window(&series.values, e, window))
        .collect();
    let mut scores = Vec::with_capacity(series.test_len());
    let mut scratch = Vec::with_capacity(train.len());
    for end in ts + window - 1..series.len() {
        let s = window_score(
            &flat_window(&series.values, end, window),
            &train,
            k,
            &mut scratch,
        );
        if scores.is_empty() {
            // the first window also covers the h - 1 points before its end
            scores.extend(std::iter::repeat_n(s, window - 1));
        }
        scores.push(s);
    }
    Ok(ModelOutput {
        model_id: format!("knn_h{window}_k{k}"),
        series_id: series.id.clone(),
        scores,
        predictions: None,
    })
}

/// Reads every `<model_id>__<series_id>.csv` in `dir` and checks it against
/// the referenced series of `dataset`.
pub fn ingest_external(dir: &Path, dataset: &Dataset) -> Result<Vec<ModelOutput>> {
    let mut outputs = Vec::new();
    for path in list_files(dir, &["csv"])? {
        let out = read_score_file(&path)?;
        let series = dataset.get(&out.series_id).ok_or_else(|| {
            Error::invalid(format!(
                "{}: unknown series id '{}'",
                path.display(),
                out.series_id
            ))
        })?;
        out.validate_against(series)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        outputs.push(out);
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uni(vals: &[f64], train_end: usize) -> TimeSeries {
        TimeSeries::univariate("s", vals)
            .unwrap()
            .with_train_end(train_end)
            .unwrap()
    }

    #[test]
    fn constant_series_scores_zero() {
        let s = uni(&[3.0; 20], 5);
        let out = moving_average_scores(&s, 4).unwrap();
        assert!(out.scores.iter().all(|&v| v == 0.0));
        assert_eq!(out.scores.len(), 15);
    }

    #[test]
    fn ma_jump() {
        let out = moving_average_scores(&uni(&[0.0, 0.0, 0.0, 10.0], 0), 3).unwrap();
        assert_eq!(out.scores, vec![0.0, 0.0, 0.0, 100.0]);
        assert_eq!(out.predictions.unwrap()[0], vec![0.0]);
    }

    #[test]
    fn ma_multivariate_matches_per_coordinate() {
        let vals = vec![
            vec![1.0, 2.0],
            vec![3.0, -1.0],
            vec![0.5, 4.0],
            vec![2.0, 2.0],
        ];
        let s = TimeSeries::new("m", vals.clone(), None, Some(1)).unwrap();
        let out = moving_average_scores(&s, 2).unwrap();
        for (i, t) in (1usize..4).enumerate() {
            let lo = t.saturating_sub(2);
            let mut expect = 0.0;
            for j in 0..2 {
                let m: f64 = vals[lo..t].iter().map(|r| r[j]).sum::<f64>() / (t - lo) as f64;
                expect += (vals[t][j] - m).powi(2);
            }
            assert!((out.scores[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_exact_match_zero() {
        let s = uni(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0], 3);
        let out = knn_scores(&s, 3, 1).unwrap();
        assert_eq!(out.scores, vec![0.0, 0.0, 0.0]);
        assert!(out.predictions.is_none());
    }

    #[test]
    fn knn_two_neighbours() {
        let train = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let mut scratch = Vec::new();
        assert_eq!(window_score(&[0.0, 1.0], &train, 2, &mut scratch), 1.0);
        // stride-1 windows of [0,0,1,1] are [0,0],[0,1],[1,1]
        let out = knn_scores(&uni(&[0.0, 0.0, 1.0, 1.0, 0.0, 1.0], 4), 2, 3).unwrap();
        assert_eq!(out.scores[1], (0.0 + 1.0 + 1.0) / 3.0);
    }

    #[test]
    fn knn_insufficient_train() {
        let err = knn_scores(&uni(&[0.0; 10], 3), 3, 5).unwrap_err();
        assert!(err.to_string().contains("at least 7"), "{err}");
    }

    #[test]
    fn roster_ids() {
        let ids: Vec<String> = default_roster().into_iter().map(|c| c.model_id).collect();
        assert_eq!(
            ids,
            [
                "ma_h4",
                "ma_h8",
                "ma_h16",
                "ma_h32",
                "knn_h16_k1",
                "knn_h16_k5",
                "knn_h16_k10"
            ]
        );
    }

    fn brute_knn(vals: &[f64], te: usize, h: usize, k: usize) -> Vec<f64> {
        let train: Vec<&[f64]> = (0..=te - h).map(|s| &vals[s..s + h]).collect();
        let mut out = Vec::new();
        for end in te + h - 1..vals.len() {
            let w = &vals[end + 1 - h..=end];
            let mut d: Vec<f64> = train.iter().map(|tw| sq_dist(tw, w)).collect();
            d.sort_by(f64::total_cmp);
            out.push(d[..k].iter().sum::<f64>() / k as f64);
        }
        out
    }

    proptest! {
        #[test]
        fn ma_translation_invariant(vals in prop::collection::vec(-50i32..50, 2..40), c in -100i32..100, h in 1usize..6) {
            let a: Vec<f64> = vals.iter().map(|&v| f64::from(v)).collect();
            let b: Vec<f64> = a.iter().map(|v| v + f64::from(c)).collect();
            let te = a.len() / 2;
            let sa = moving_average_scores(&uni(&a, te), h).unwrap().scores;
            let sb = moving_average_scores(&uni(&b, te), h).unwrap().scores;
            for (x, y) in sa.iter().zip(&sb) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{} vs {}", x, y);
            }
        }

        #[test]
        fn knn_matches_brute_force(vals in prop::collection::vec(-20i32..20, 12..40), h in 1usize..4, k in 1usize..4) {
            let a: Vec<f64> = vals.iter().map(|&v| f64::from(v)).collect();
            let te = a.len() / 2;
            let out = knn_scores(&uni(&a, te), h, k).unwrap().scores;
            let oracle = brute_knn(&a, te, h, k);
            prop_assert_eq!(&out[h - 1..], &oracle[..]);
            prop_assert!(out[..h - 1].iter().all(|&s| s == oracle[0]));
            // averaging over more neighbours never lowers the score
            let more = knn_scores(&uni(&a, te), h, k + 1).unwrap().scores;
            for (x, y) in out.iter().zip(&more) {
                prop_assert!(y >= x);
            }
        }

        #[test]
        fn knn_ignores_train_window_order(
            windows in prop::collection::vec(prop::collection::vec(-9i32..9, 3), 2..10),
            test in prop::collection::vec(-9i32..9, 3),
            k in 1usize..3,
            rot in 0usize..10,
        ) {
            let train: Vec<Vec<f64>> = windows.iter().map(|w| w.iter().map(|&v| f64::from(v)).collect()).collect();
            let mut rotated = train.clone();
            rotated.rotate_left(rot % train.len());
            rotated.reverse();
            let t: Vec<f64> = test.iter().map(|&v| f64::from(v)).collect();
            let mut scratch = Vec::new();
            prop_assert_eq!(window_score(&t, &train, k, &mut scratch), window_score(&t, &rotated, k, &mut scratch));
        }
    }
}
