use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::rng::RngSeed;

use super::RankingSet;

/// Mallows distribution `p(s) ~ exp(-theta * d(s, center))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MallowsParams {
    pub center: Permutation,
    pub theta: f64,
}

/// `count` independent draws by repeated insertion: the `i`-th item of the
/// center order goes to position `j` of the partial list with probability
/// proportional to `exp(-theta * (i - j))`, adding exactly `i - j` disagreements.
pub fn mallows_sample(params: &MallowsParams, count: usize, seed: RngSeed) -> Result<RankingSet> {
    if !(params.theta >= 0.0 && params.theta.is_finite()) {
        return Err(Error::invalid(format!(
            "Mallows theta must be finite and >= 0, got {}",
            params.theta
        )));
    }
    if count == 0 {
        return Err(Error::invalid("Mallows sample count must be >= 1"));
    }
    let n = params.center.len();
    let center_order = params.center.order();
    // weights[i - j] for inserting i - j places above the bottom
    let decay: Vec<f64> = (0..n).map(|s| (-params.theta * s as f64).exp()).collect();
    let mut rng = seed.rng();
    let mut rankings = Vec::with_capacity(count);
    let mut list: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..count {
        list.clear();
        for (i, &item) in center_order.iter().enumerate() {
            // positions 0..=i in the current list; position i is the bottom
            let total: f64 = decay[..=i].iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut shift = 0;
            while shift < i && u >= decay[shift] {
                u -= decay[shift];
                shift += 1;
            }
            list.insert(i - shift, item);
        }
        rankings.push(Permutation::from_order(&list)?);
    }
    let ids = (0..count).map(|k| format!("s{k}")).collect();
    RankingSet::new(rankings, ids)
}
