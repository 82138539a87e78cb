//! Rank aggregation: Kendall distance, the Borda family, empirical
//! influence, exact Kemeny for small model sets, and Mallows sampling.

mod borda;
mod influence;
mod kemeny;
mod mallows;
pub mod theory;

pub use borda::{borda, partial_borda, robust_borda, trimmed_borda};
pub use influence::{
    empirical_influence, largest_gap_split, minimum_influence_metric, trim_by_influence, TrimResult,
};
pub use kemeny::{
    is_feasible_ordering, kemeny_exact, ordering_matrix, preference_matrix, KEMENY_MAX_N,
};
pub use mallows::{mallows_sample, MallowsParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{count_inversions, Permutation};

/// `M` rankings of the same `N` models, each tagged with the metric that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSet {
    pub rankings: Vec<Permutation>,
    pub metric_ids: Vec<String>,
}

impl RankingSet {
    pub fn new(rankings: Vec<Permutation>, metric_ids: Vec<String>) -> Result<Self> {
        let set = RankingSet {
            rankings,
            metric_ids,
        };
        set.validate()?;
        Ok(set)
    }

    /// Tags rankings `r0, r1, ...`.
    pub fn unnamed(rankings: Vec<Permutation>) -> Result<Self> {
        let ids = (0..rankings.len()).map(|i| format!("r{i}")).collect();
        Self::new(rankings, ids)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rankings.is_empty() {
            return Err(Error::invalid("ranking set is empty"));
        }
        if self.metric_ids.len() != self.rankings.len() {
            return Err(Error::invalid(format!(
                "{} rankings but {} metric ids",
                self.rankings.len(),
                self.metric_ids.len()
            )));
        }
        let n = self.rankings[0].len();
        if n == 0 {
            return Err(Error::invalid("rankings over zero models"));
        }
        if let Some(p) = self.rankings.iter().find(|p| p.len() != n) {
            return Err(Error::invalid(format!(
                "rankings over {} and {} models",
                n,
                p.len()
            )));
        }
        Ok(())
    }

    /// Number of models.
    pub fn n(&self) -> usize {
        self.rankings[0].len()
    }

    /// Number of rankings.
    pub fn m(&self) -> usize {
        self.rankings.len()
    }

    /// The set restricted to the indices in `keep` (in that order).
    pub fn select(&self, keep: &[usize]) -> RankingSet {
        RankingSet {
            rankings: keep.iter().map(|&i| self.rankings[i].clone()).collect(),
            metric_ids: keep.iter().map(|&i| self.metric_ids[i].clone()).collect(),
        }
    }

    /// The set without ranking `i`.
    pub fn without(&self, i: usize) -> RankingSet {
        let keep: Vec<usize> = (0..self.m()).filter(|&j| j != i).collect();
        self.select(&keep)
    }
}

/// Number of model pairs the two rankings order differently.
pub fn kendall_tau(a: &Permutation, b: &Permutation) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "kendall_tau: sizes {} and {}",
            a.len(),
            b.len()
        )));
    }
    // b's ranks listed in a's order; each inversion is a disagreement
    let mut seq: Vec<usize> = a.order().into_iter().map(|i| b.rank(i)).collect();
    Ok(count_inversions(&mut seq))
}

/// Mean Kendall distance from `center` to the members of `set`.
pub fn mean_distance(center: &Permutation, set: &RankingSet) -> Result<f64> {
    let mut total = 0u64;
    for r in &set.rankings {
        total += kendall_tau(center, r)?;
    }
    Ok(total as f64 / set.m() as f64)
}
