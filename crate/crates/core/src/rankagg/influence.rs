use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::rng::RngSeed;

use super::{borda, mean_distance, RankingSet};

/// Borda objective of `set`: mean distance from its Borda ranking to its
/// members.
fn objective(set: &RankingSet, seed: RngSeed) -> Result<f64> {
    mean_distance(&borda(set, seed)?, set)
}

/// `EI_i = f(S) - f(S without ranking i)` for every ranking, where `f` is the
/// Borda objective. All `M + 1` Borda calls share `seed`.
pub fn empirical_influence(set: &RankingSet, seed: RngSeed) -> Result<Vec<f64>> {
    set.validate()?;
    if set.m() < 2 {
        return Err(Error::invalid(format!(
            "empirical influence needs at least 2 rankings, got {}",
            set.m()
        )));
    }
    let full = objective(set, seed)?;
    (0..set.m())
        .map(|i| Ok(full - objective(&set.without(i), seed)?))
        .collect()
}

/// Threshold separating the two single-linkage clusters of `values`: the
/// midpoint of the widest gap between sorted neighbours. `None` when all
/// values are equal. On equally wide gaps the highest one is used.
pub fn largest_gap_split(values: &[f64]) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for w in sorted.windows(2) {
        let gap = w[1] - w[0];
        if gap > 0.0 && best.is_none_or(|(g, _)| gap >= g) {
            best = Some((gap, w[0] + gap / 2.0));
        }
    }
    best.map(|(_, cut)| cut)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimResult {
    pub kept: RankingSet,
    pub discarded: Vec<String>,
    /// Influence of every input ranking, in input order.
    pub influence: Vec<f64>,
}

/// Drops the high-influence cluster of rankings.
pub fn trim_by_influence(set: &RankingSet, seed: RngSeed) -> Result<TrimResult> {
    let influence = empirical_influence(set, seed)?;
    let (keep, drop): (Vec<usize>, Vec<usize>) = match largest_gap_split(&influence) {
        Some(cut) => (0..set.m()).partition(|&i| influence[i] < cut),
        None => ((0..set.m()).collect(), Vec::new()),
    };
    Ok(TrimResult {
        kept: set.select(&keep),
        discarded: drop.iter().map(|&i| set.metric_ids[i].clone()).collect(),
        influence,
    })
}

/// The ranking with the smallest influence (first one on ties).
pub fn minimum_influence_metric(set: &RankingSet, seed: RngSeed) -> Result<(String, Permutation)> {
    let influence = empirical_influence(set, seed)?;
    let mut best = 0;
    for (i, &v) in influence.iter().enumerate() {
        if v < influence[best] {
            best = i;
        }
    }
    Ok((set.metric_ids[best].clone(), set.rankings[best].clone()))
}
