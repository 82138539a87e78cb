//! Sub-sampling and selection/evaluation splits.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::series::{Dataset, TimeSeries};

/// Length above which series are decimated before scoring.
pub const DEFAULT_SUBSAMPLE_THRESHOLD: usize = 2560;
pub const DEFAULT_SUBSAMPLE_FACTOR: usize = 10;

/// Keeps every `factor`-th observation (indices `0, factor, 2*factor, ...`)
/// when the series is longer than `threshold`.
///
/// `train_end` becomes the number of kept indices below the old boundary, so
/// every kept point stays on its original side of the split.
pub fn subsample(series: &TimeSeries, threshold: usize, factor: usize) -> TimeSeries {
    let factor = factor.max(1);
    if series.len() <= threshold || factor == 1 {
        return series.clone();
    }
    let values: Vec<Vec<f64>> = series.values.iter().step_by(factor).cloned().collect();
    let labels = series
        .labels
        .as_ref()
        .map(|l| l.iter().step_by(factor).copied().collect());
    TimeSeries {
        id: series.id.clone(),
        values,
        labels,
        train_end: series.train_end.map(|te| te.div_ceil(factor)),
    }
}

pub fn subsample_dataset(dataset: &Dataset, threshold: usize, factor: usize) -> Dataset {
    Dataset {
        name: dataset.name.clone(),
        series: dataset
            .series
            .iter()
            .map(|s| subsample(s, threshold, factor))
            .collect(),
    }
}

/// Randomly assigns whole series to a selection side and an evaluation side.
///
/// The selection side receives `round(fraction * L)` series, at least one and
/// at most `L - 1`. Both sides keep the original series order.
pub fn split_selection_evaluation(
    dataset: &Dataset,
    selection_fraction: f64,
    seed: RngSeed,
) -> Result<(Dataset, Dataset)> {
    let l = dataset.len();
    if l < 2 {
        return Err(Error::invalid(format!(
            "dataset '{}' needs at least 2 series to split, has {l}",
            dataset.name
        )));
    }
    if !(selection_fraction > 0.0 && selection_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "selection fraction must lie in (0,1), got {selection_fraction}"
        )));
    }
    let n_sel = ((selection_fraction * l as f64).round() as usize).clamp(1, l - 1);
    let mut idx: Vec<usize> = (0..l).collect();
    idx.shuffle(&mut seed.rng());
    let mut chosen = vec![false; l];
    for &i in &idx[..n_sel] {
        chosen[i] = true;
    }
    let (sel, eval): (Vec<_>, Vec<_>) = dataset
        .series
        .iter()
        .cloned()
        .zip(chosen)
        .partition(|(_, c)| *c);
    let strip = |v: Vec<(TimeSeries, bool)>| v.into_iter().map(|(s, _)| s).collect::<Vec<_>>();
    Ok((
        Dataset {
            name: dataset.name.clone(),
            series: strip(sel),
        },
        Dataset {
            name: dataset.name.clone(),
            series: strip(eval),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(t: usize) -> TimeSeries {
        let vals: Vec<f64> = (0..t).map(|i| i as f64).collect();
        TimeSeries::univariate("s", &vals).unwrap()
    }

    fn dataset(l: usize) -> Dataset {
        let series = (0..l)
            .map(|i| TimeSeries::univariate(format!("s{i}"), &[1.0, 2.0]).unwrap())
            .collect();
        Dataset::new("d", series).unwrap()
    }

    #[test]
    fn below_threshold_unchanged() {
        let s = series(100);
        assert_eq!(subsample(&s, DEFAULT_SUBSAMPLE_THRESHOLD, 10), s);
    }

    #[test]
    fn long_series_decimated() {
        let s = series(5000);
        let out = subsample(&s, DEFAULT_SUBSAMPLE_THRESHOLD, DEFAULT_SUBSAMPLE_FACTOR);
        assert_eq!(out.len(), 500);
        assert_eq!(out.values[3][0], 30.0);
    }

    #[test]
    fn label_index_follows_stride() {
        let mut labels = vec![0u8; 3000];
        labels[10] = 1;
        let s = series(3000)
            .with_labels(labels)
            .unwrap()
            .with_train_end(15)
            .unwrap();
        let out = subsample(&s, DEFAULT_SUBSAMPLE_THRESHOLD, 10);
        let l = out.labels.unwrap();
        assert_eq!(l[1], 1);
        assert_eq!(l.iter().map(|&x| x as usize).sum::<usize>(), 1);
        // kept indices 0 and 10 are below the old boundary 15
        assert_eq!(out.train_end, Some(2));
    }

    #[test]
    fn split_sizes() {
        let (s, e) = split_selection_evaluation(&dataset(10), 0.2, RngSeed(3)).unwrap();
        assert_eq!((s.len(), e.len()), (2, 8));
        let (s, e) = split_selection_evaluation(&dataset(3), 0.2, RngSeed(3)).unwrap();
        assert_eq!((s.len(), e.len()), (1, 2));
        assert!(split_selection_evaluation(&dataset(1), 0.2, RngSeed(3)).is_err());
    }

    #[test]
    fn split_is_seed_determined() {
        let d = dataset(10);
        let a = split_selection_evaluation(&d, 0.2, RngSeed(11)).unwrap();
        let b = split_selection_evaluation(&d, 0.2, RngSeed(11)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn subsample_idempotent_once_short(t in 1usize..400, threshold in 1usize..100, factor in 1usize..12) {
            let once = subsample(&series(t), threshold, factor);
            if once.len() <= threshold {
                prop_assert_eq!(subsample(&once, threshold, factor), once);
            }
        }

        #[test]
        fn split_is_partition(l in 2usize..40, frac in 0.01f64..0.99, seed: u64) {
            let d = dataset(l);
            let (s, e) = split_selection_evaluation(&d, frac, RngSeed(seed)).unwrap();
            prop_assert_eq!(s.len() + e.len(), l);
            prop_assert!(!s.is_empty() && !e.is_empty());
            let mut ids: Vec<&str> = s.ids().chain(e.ids()).collect();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), l);
        }
    }
}
