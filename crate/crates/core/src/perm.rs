//! Rankings of candidate models.
//!
//! Ranks are 1-based and rank 1 is the best model.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// Whether small or large metric values indicate a better model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerIsBetter,
    HigherIsBetter,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::LowerIsBetter => "lower_is_better",
            Direction::HigherIsBetter => "higher_is_better",
        }
    }
}

/// A total order over `N` items, stored as `ranks[i]` = rank of item `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    ranks: Vec<usize>,
}

impl Permutation {
    /// Validates that `ranks` is a bijection onto `1..=N`.
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        let n = ranks.len();
        let mut seen = vec![false; n];
        for &r in &ranks {
            if r == 0 || r > n || seen[r - 1] {
                return Err(Error::invalid(format!(
                    "{ranks:?} is not a permutation of 1..={n}"
                )));
            }
            seen[r - 1] = true;
        }
        Ok(Permutation { ranks })
    }

    /// Builds from the items listed best-first (the inverse permutation).
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let n = order.len();
        let mut ranks = vec![0; n];
        for (pos, &item) in order.iter().enumerate() {
            if item >= n || ranks[item] != 0 {
                return Err(Error::invalid(format!(
                    "{order:?} is not an ordering of 0..{n}"
                )));
            }
            ranks[item] = pos + 1;
        }
        Ok(Permutation { ranks })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            ranks: (1..=n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Rank of item `i` (1 = best).
    pub fn rank(&self, item: usize) -> usize {
        self.ranks[item]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Items listed from best to worst.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (item, &r) in self.ranks.iter().enumerate() {
            order[r - 1] = item;
        }
        order
    }

    /// The rank-1 item.
    pub fn top(&self) -> usize {
        self.ranks
            .iter()
            .position(|&r| r == 1)
            .expect("non-empty permutation")
    }

    /// The same ordering read bottom-up.
    pub fn reversed(&self) -> Self {
        let n = self.ranks.len();
        Permutation {
            ranks: self.ranks.iter().map(|&r| n + 1 - r).collect(),
        }
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::from_ranks(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.ranks
    }
}

/// Ranks `values` under `direction`; `None` marks an inapplicable value,
/// which sorts after every finite one.
///
/// Equal values (and the inapplicable block) are ordered uniformly at random
/// from `seed`: items are shuffled first, then stably sorted.
pub fn rank_from_values(
    values: &[Option<f64>],
    direction: Direction,
    seed: RngSeed,
) -> Result<Permutation> {
    if values.is_empty() {
        return Err(Error::invalid("cannot rank an empty value list"));
    }
    if let Some(v) = values.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("cannot rank non-finite value {v}")));
    }
    let mut items: Vec<usize> = (0..values.len()).collect();
    items.shuffle(&mut seed.rng());
    items.sort_by(|&a, &b| compare(values[a], values[b], direction));
    Ok(Permutation::from_order(&items).expect("sorted indices form an ordering"))
}

/// [`rank_from_values`] for slices with no inapplicable entries.
pub fn rank_finite(values: &[f64], direction: Direction, seed: RngSeed) -> Result<Permutation> {
    let wrapped: Vec<Option<f64>> = values.iter().copied().map(Some).collect();
    rank_from_values(&wrapped, direction, seed)
}

fn compare(a: Option<f64>, b: Option<f64>, direction: Direction) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => {
            let ord = x.partial_cmp(&y).unwrap_or(Ordering::Equal);
            match direction {
                Direction::LowerIsBetter => ord,
                Direction::HigherIsBetter => ord.reverse(),
            }
        }
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Number of pairs `i < j` with `seq[i] > seq[j]`, by merge sort in
/// `O(n log n)`. `seq` is left sorted.
pub fn count_inversions<T: Ord + Copy>(seq: &mut [T]) -> u64 {
    let mut buf = seq.to_vec();
    sort_count(seq, &mut buf)
}

fn sort_count<T: Ord + Copy>(seq: &mut [T], buf: &mut [T]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (l, r) = seq.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        sort_count(l, bl) + sort_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if seq[j] < seq[i] {
            // every remaining left element exceeds seq[j]
            inv += (mid - i) as u64;
            buf[k] = seq[j];
            j += 1;
        } else {
            buf[k] = seq[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&seq[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&seq[j..n]);
    seq.copy_from_slice(&buf[..n]);
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strict_order_lower_is_better() {
        let p = rank_finite(&[3.0, 1.0, 2.0], Direction::LowerIsBetter, RngSeed(0)).unwrap();
        assert_eq!(p.ranks(), &[3, 1, 2]);
    }

    #[test]
    fn direction_flip() {
        let p = rank_finite(&[0.9, 0.7], Direction::HigherIsBetter, RngSeed(0)).unwrap();
        assert_eq!(p.ranks(), &[1, 2]);
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert!(rank_finite(&[], Direction::LowerIsBetter, RngSeed(0)).is_err());
        assert!(rank_finite(&[f64::NAN], Direction::LowerIsBetter, RngSeed(0)).is_err());
    }

    #[test]
    fn ties_are_fair_coin() {
        let trials = 10_000;
        let first = (0..trials)
            .filter(|&s| {
                rank_finite(&[1.0, 1.0], Direction::LowerIsBetter, RngSeed(s))
                    .unwrap()
                    .ranks()
                    == [1, 2]
            })
            .count();
        let freq = first as f64 / trials as f64;
        assert!((freq - 0.5).abs() <= 0.02, "freq {freq}");
    }

    #[test]
    fn inapplicable_sorts_last() {
        let vals = [None, Some(5.0), None, Some(1.0)];
        for s in 0..20 {
            let p = rank_from_values(&vals, Direction::LowerIsBetter, RngSeed(s)).unwrap();
            assert_eq!(p.rank(3), 1);
            assert_eq!(p.rank(1), 2);
            assert!(p.rank(0) > 2 && p.rank(2) > 2);
        }
    }

    #[test]
    fn order_roundtrip() {
        let p = Permutation::from_ranks(vec![2, 3, 1]).unwrap();
        assert_eq!(p.order(), vec![2, 0, 1]);
        assert_eq!(Permutation::from_order(&p.order()).unwrap(), p);
        assert_eq!(p.top(), 2);
        assert!(Permutation::from_ranks(vec![1, 1]).is_err());
        assert!(Permutation::from_ranks(vec![0, 1]).is_err());
    }

    #[test]
    fn inversion_count_small() {
        assert_eq!(count_inversions(&mut [1, 2, 3]), 0);
        assert_eq!(count_inversions(&mut [3, 2, 1]), 3);
        assert_eq!(count_inversions(&mut [2, 1, 3, 1]), 3);
    }

    proptest! {
        #[test]
        fn ranking_is_bijection(vals in prop::collection::vec(prop::option::of(-5i32..5), 1..30), seed: u64) {
            let v: Vec<Option<f64>> = vals.iter().map(|o| o.map(f64::from)).collect();
            let p = rank_from_values(&v, Direction::HigherIsBetter, RngSeed(seed)).unwrap();
            prop_assert!(Permutation::from_ranks(p.ranks().to_vec()).is_ok());
        }

        #[test]
        fn inversions_match_brute_force(v in prop::collection::vec(0u8..20, 0..60)) {
            let mut brute = 0u64;
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    if v[i] > v[j] { brute += 1; }
                }
            }
            let mut w = v.clone();
            prop_assert_eq!(count_inversions(&mut w), brute);
        }
    }
}
