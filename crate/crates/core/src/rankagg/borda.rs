use crate::error::{Error, Result};
use crate::perm::{rank_finite, Direction, Permutation};
use crate::rng::RngSeed;

use super::influence::trim_by_influence;
use super::RankingSet;

/// Each ranking awards `N - rank` points; models are ordered by total points,
/// ties broken at random from `seed`.
pub fn borda(set: &RankingSet, seed: RngSeed) -> Result<Permutation> {
    set.validate()?;
    points_to_ranking(set, set.n(), seed)
}

/// Borda counting only positions `1..=k`; lower positions earn nothing.
pub fn partial_borda(set: &RankingSet, k: usize, seed: RngSeed) -> Result<Permutation> {
    set.validate()?;
    if k == 0 || k > set.n() {
        return Err(Error::invalid(format!(
            "top-k Borda needs 1 <= k <= {}, got {k}",
            set.n()
        )));
    }
    points_to_ranking(set, k, seed)
}

fn points_to_ranking(set: &RankingSet, k: usize, seed: RngSeed) -> Result<Permutation> {
    let n = set.n();
    let mut points = vec![0u64; n];
    for r in &set.rankings {
        for (item, &rank) in r.ranks().iter().enumerate() {
            if rank <= k {
                points[item] += (n - rank) as u64;
            }
        }
    }
    let values: Vec<f64> = points.iter().map(|&p| p as f64).collect();
    rank_finite(&values, Direction::HigherIsBetter, seed)
}

/// Borda over the rankings that survive influence trimming.
pub fn trimmed_borda(set: &RankingSet, seed: RngSeed) -> Result<Permutation> {
    let trim = trim_by_influence(set, seed)?;
    borda(&trim.kept, seed)
}

/// Influence trimming followed by top-k Borda.
pub fn robust_borda(set: &RankingSet, k: usize, seed: RngSeed) -> Result<Permutation> {
    let trim = trim_by_influence(set, seed)?;
    partial_borda(&trim.kept, k, seed)
}
