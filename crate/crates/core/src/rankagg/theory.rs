//! Monte-Carlo checks of Borda aggregation behaviour.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::rng::RngSeed;

use super::{borda, empirical_influence, kendall_tau, mallows_sample, MallowsParams, RankingSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub m: usize,
    pub trials: usize,
    /// Fraction of trials where Borda put the worse item of the pair first.
    pub error_rate: f64,
    /// `2 exp(-M eps^2 / 2)`.
    pub bound: f64,
    /// Binomial standard deviation of `error_rate` at the bound.
    pub std_err: f64,
}

/// Two items, `M` independent voters that each rank the better item first
/// with probability `(1 + epsilon) / 2`; records how often Borda (with random
/// tie-breaks) ranks the worse item first.
pub fn borda_theory_check(
    m_values: &[usize],
    epsilon: f64,
    trials: usize,
    seed: RngSeed,
) -> Result<Vec<TheoryRow>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0,1], got {epsilon}"
        )));
    }
    if trials == 0 || m_values.contains(&0) {
        return Err(Error::invalid("trials and every M must be >= 1"));
    }
    let q = (1.0 + epsilon) / 2.0;
    let right = Permutation::identity(2);
    let wrong = right.reversed();
    m_values
        .iter()
        .enumerate()
        .map(|(idx, &m)| {
            let row_seed = seed.derive(idx as u64);
            let errors: usize = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let s = row_seed.derive(t as u64);
                    let mut rng = s.rng();
                    let votes: Vec<Permutation> = (0..m)
                        .map(|_| {
                            if rng.random_bool(q) {
                                right.clone()
                            } else {
                                wrong.clone()
                            }
                        })
                        .collect();
                    let set = RankingSet::unnamed(votes).expect("non-empty vote set");
                    let agg = borda(&set, s.derive(1)).expect("valid vote set");
                    usize::from(agg.top() != 0)
                })
                .sum();
            let bound = 2.0 * (-(m as f64) * epsilon * epsilon / 2.0).exp();
            let pb = bound.min(1.0);
            Ok(TheoryRow {
                m,
                trials,
                error_rate: errors as f64 / trials as f64,
                bound,
                std_err: (pb * (1.0 - pb) / trials as f64).sqrt(),
            })
        })
        .collect()
}

/// Grid for the outlier-influence simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSimConfig {
    /// Items per ranking.
    pub n: usize,
    /// Rankings per set.
    pub m: usize,
    pub thetas: Vec<f64>,
    /// Fractions of the `m` rankings replaced by uniform draws.
    pub fractions: Vec<f64>,
    pub trials: usize,
    pub seed: RngSeed,
}

impl Default for OutlierSimConfig {
    fn default() -> Self {
        OutlierSimConfig {
            n: 50,
            m: 50,
            thetas: vec![0.05, 0.1, 0.2],
            fractions: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            trials: 20,
            seed: RngSeed(0),
        }
    }
}

/// One ranking of one simulated set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSimRecord {
    pub theta: f64,
    pub trial: usize,
    pub fraction_noise: f64,
    /// Distance from the Borda ranking of the whole set to the center.
    pub d_median_center: u64,
    pub ranking: usize,
    pub is_outlier: bool,
    pub influence: f64,
    pub d_center: u64,
}

/// Mallows sets with a growing share of uniform outliers.
///
/// Within a trial every fraction reuses the same Mallows and uniform draws
/// (the first `round(fraction * m)` Mallows rankings are swapped for uniform
/// ones), so differences between fractions come from the outliers alone.
pub fn outlier_simulation(config: &OutlierSimConfig) -> Result<Vec<OutlierSimRecord>> {
    if config.n == 0 || config.m < 2 || config.trials == 0 {
        return Err(Error::invalid(
            "simulation needs n >= 1, m >= 2 and trials >= 1",
        ));
    }
    if let Some(f) = config.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::invalid(format!(
            "outlier fraction {f} outside [0,1]"
        )));
    }
    let cells: Vec<(usize, usize)> = (0..config.thetas.len())
        .flat_map(|ti| (0..config.trials).map(move |t| (ti, t)))
        .collect();
    let per_cell: Vec<Vec<OutlierSimRecord>> = cells
        .par_iter()
        .map(|&(ti, trial)| simulate_cell(config, ti, trial))
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

fn simulate_cell(
    config: &OutlierSimConfig,
    ti: usize,
    trial: usize,
) -> Result<Vec<OutlierSimRecord>> {
    let theta = config.thetas[ti];
    let seed = config.seed.derive(ti as u64).derive(trial as u64);
    let mut rng = seed.derive(0).rng();
    let mut center_order: Vec<usize> = (0..config.n).collect();
    center_order.shuffle(&mut rng);
    let center = Permutation::from_order(&center_order)?;
    let params = MallowsParams {
        center: center.clone(),
        theta,
    };
    let inliers = mallows_sample(&params, config.m, seed.derive(1))?;
    let uniform = mallows_sample(
        &MallowsParams {
            center: center.clone(),
            theta: 0.0,
        },
        config.m,
        seed.derive(2),
    )?;
    let mut out = Vec::new();
    for &fraction in &config.fractions {
        let n_out = (fraction * config.m as f64).round() as usize;
        let rankings: Vec<Permutation> = (0..config.m)
            .map(|i| {
                if i < n_out {
                    uniform.rankings[i].clone()
                } else {
                    inliers.rankings[i].clone()
                }
            })
            .collect();
        let set = RankingSet::unnamed(rankings)?;
        let agg_seed = seed.derive(3);
        let median = borda(&set, agg_seed)?;
        let d_median_center = kendall_tau(&median, &center)?;
        let influence = empirical_influence(&set, agg_seed)?;
        for (i, r) in set.rankings.iter().enumerate() {
            out.push(OutlierSimRecord {
                theta,
                trial,
                fraction_noise: fraction,
                d_median_center,
                ranking: i,
                is_outlier: i < n_out,
                influence: influence[i],
                d_center: kendall_tau(r, &center)?,
            });
        }
    }
    Ok(out)
}
