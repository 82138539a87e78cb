use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::wilcoxon_one_sided;

use super::run::SelectionReport;

/// One ordered comparison `a > b` on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseEntry {
    pub dataset: String,
    pub a: String,
    pub b: String,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Significant wins and losses of each strategy over all datasets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTable {
    pub alpha: f64,
    pub strategies: Vec<String>,
    pub wins: BTreeMap<String, usize>,
    pub losses: BTreeMap<String, usize>,
    pub entries: Vec<PairwiseEntry>,
}

impl PairwiseTable {
    /// `strategy,significant_wins,significant_losses`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,significant_wins,significant_losses\n");
        for s in &self.strategies {
            out.push_str(&format!("{s},{},{}\n", self.wins[s], self.losses[s]));
        }
        out
    }
}

/// One-sided Wilcoxon tests over repetition-level F1 for every ordered pair
/// of distinct strategies on every dataset.
pub fn pairwise_tests(reports: &[SelectionReport], alpha: f64) -> Result<PairwiseTable> {
    let first = reports
        .first()
        .ok_or_else(|| Error::invalid("pairwise tests need at least one report"))?;
    for r in reports {
        if r.strategies != first.strategies {
            return Err(Error::invalid(format!(
                "datasets '{}' and '{}' compare different strategies",
                first.dataset, r.dataset
            )));
        }
    }
    let data: Vec<(String, BTreeMap<String, Vec<f64>>)> = reports
        .iter()
        .map(|r| (r.dataset.clone(), r.f1_series()))
        .collect();
    pairwise_from_f1(&data, &first.strategies, alpha)
}

/// [`pairwise_tests`] on raw per-dataset, per-strategy F1 samples.
pub fn pairwise_from_f1(
    data: &[(String, BTreeMap<String, Vec<f64>>)],
    strategies: &[String],
    alpha: f64,
) -> Result<PairwiseTable> {
    if data.is_empty() {
        return Err(Error::invalid("pairwise tests need at least one dataset"));
    }
    if strategies.len() < 2 {
        return Err(Error::invalid(
            "pairwise tests need at least two strategies",
        ));
    }
    let reps = data[0].1.get(&strategies[0]).map_or(0, Vec::len);
    for (name, f1) in data {
        for s in strategies {
            let v = f1.get(s).ok_or_else(|| {
                Error::missing(format!("F1 of strategy '{s}' on dataset '{name}'"))
            })?;
            if v.len() != reps {
                return Err(Error::invalid(format!(
                    "unequal repetition counts: {} vs {reps} (strategy '{s}', dataset '{name}')",
                    v.len()
                )));
            }
        }
    }
    let mut table = PairwiseTable {
        alpha,
        strategies: strategies.to_vec(),
        wins: strategies.iter().map(|s| (s.clone(), 0)).collect(),
        losses: strategies.iter().map(|s| (s.clone(), 0)).collect(),
        entries: Vec::new(),
    };
    for (name, f1) in data {
        for a in strategies {
            for b in strategies {
                if a == b {
                    continue;
                }
                let w = wilcoxon_one_sided(&f1[a], &f1[b], alpha)?;
                if w.significant {
                    *table.wins.get_mut(a).expect("strategy") += 1;
                    *table.losses.get_mut(b).expect("strategy") += 1;
                }
                table.entries.push(PairwiseEntry {
                    dataset: name.clone(),
                    a: a.clone(),
                    b: b.clone(),
                    statistic: w.statistic,
                    p_value: w.p_value,
                    significant: w.significant,
                });
            }
        }
    }
    Ok(table)
}
