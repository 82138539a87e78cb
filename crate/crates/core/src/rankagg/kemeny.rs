use crate::error::{Error, Result};
use crate::perm::Permutation;

use super::RankingSet;

/// Largest model count the subset dynamic program accepts.
pub const KEMENY_MAX_N: usize = 12;

/// `pref[i][j]` = number of rankings placing model `i` above model `j`.
pub fn preference_matrix(set: &RankingSet) -> Vec<Vec<u64>> {
    let n = set.n();
    let mut pref = vec![vec![0u64; n]; n];
    for r in &set.rankings {
        for (i, row) in pref.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                if r.rank(i) < r.rank(j) {
                    *cell += 1;
                }
            }
        }
    }
    pref
}

/// A ranking minimising the total Kendall distance to `set`.
///
/// Dynamic program over subsets: `best[R]` is the cheapest way to order the
/// models in `R` below everything outside it, where putting `j` first in `R`
/// costs the votes that rank some other member of `R` above `j`. Among
/// optimal rankings the one whose best-first listing is lexicographically
/// smallest is returned.
pub fn kemeny_exact(set: &RankingSet) -> Result<Permutation> {
    set.validate()?;
    let n = set.n();
    if n > KEMENY_MAX_N {
        return Err(Error::invalid(format!(
            "exact Kemeny is limited to {KEMENY_MAX_N} models, got {n}; use Borda instead"
        )));
    }
    let pref = preference_matrix(set);
    let full = (1usize << n) - 1;
    // cost_first(j, R): votes with some i in R \ {j} above j
    let cost_first = |j: usize, r: usize| -> u64 {
        (0..n)
            .filter(|&i| i != j && r & (1 << i) != 0)
            .map(|i| pref[i][j])
            .sum()
    };
    let mut best = vec![u64::MAX; full + 1];
    best[0] = 0;
    for r in 1..=full {
        for j in 0..n {
            if r & (1 << j) != 0 {
                let c = cost_first(j, r) + best[r & !(1 << j)];
                if c < best[r] {
                    best[r] = c;
                }
            }
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut r = full;
    while r != 0 {
        let j = (0..n)
            .find(|&j| r & (1 << j) != 0 && cost_first(j, r) + best[r & !(1 << j)] == best[r])
            .expect("some model attains the optimum");
        order.push(j);
        r &= !(1 << j);
    }
    Permutation::from_order(&order)
}

/// Binary ordering variables of a ranking: `x[i][j] = 1` when `i` is above `j`.
pub fn ordering_matrix(p: &Permutation) -> Vec<Vec<u8>> {
    let n = p.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| u8::from(i != j && p.rank(i) < p.rank(j)))
                .collect()
        })
        .collect()
}

/// Checks the constraints of the Kemeny binary program: zero diagonal,
/// `x_ij + x_ji = 1` for `i != j`, and `x_ij + x_jk + x_ki <= 2` (no cycles).
pub fn is_feasible_ordering(x: &[Vec<u8>]) -> bool {
    let n = x.len();
    if x.iter()
        .any(|row| row.len() != n || row.iter().any(|&v| v > 1))
    {
        return false;
    }
    for i in 0..n {
        if x[i][i] != 0 {
            return false;
        }
        for j in 0..n {
            if i != j && x[i][j] + x[j][i] != 1 {
                return false;
            }
            for k in 0..n {
                if i != j && j != k && i != k && x[i][j] + x[j][k] + x[k][i] > 2 {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankagg::{kendall_tau, mean_distance};

    fn p(r: &[usize]) -> Permutation {
        Permutation::from_ranks(r.to_vec()).unwrap()
    }

    #[test]
    fn unanimous_set() {
        let s = RankingSet::unnamed(vec![p(&[2, 4, 1, 3]); 3]).unwrap();
        let k = kemeny_exact(&s).unwrap();
        assert_eq!(k, p(&[2, 4, 1, 3]));
        assert_eq!(mean_distance(&k, &s).unwrap(), 0.0);
    }

    #[test]
    fn condorcet_winner_first() {
        // item 2 beats every other item in a majority of rankings
        let s = RankingSet::unnamed(vec![
            p(&[2, 3, 1, 4]),
            p(&[3, 2, 1, 4]),
            p(&[2, 4, 1, 3]),
            p(&[1, 3, 2, 4]),
            p(&[4, 2, 1, 3]),
        ])
        .unwrap();
        assert_eq!(kemeny_exact(&s).unwrap().top(), 2);
    }

    #[test]
    fn lexicographic_tie_break() {
        // two opposite voters: every ranking has the same cost
        let s = RankingSet::unnamed(vec![p(&[1, 2, 3]), p(&[3, 2, 1])]).unwrap();
        assert_eq!(kemeny_exact(&s).unwrap().order(), vec![0, 1, 2]);
    }

    #[test]
    fn output_is_feasible_and_objective_matches() {
        let s = RankingSet::unnamed(vec![
            p(&[1, 3, 2, 5, 4]),
            p(&[2, 1, 3, 4, 5]),
            p(&[5, 4, 3, 2, 1]),
        ])
        .unwrap();
        let k = kemeny_exact(&s).unwrap();
        let x = ordering_matrix(&k);
        assert!(is_feasible_ordering(&x));
        let pref = preference_matrix(&s);
        // program objective: votes disagreeing with each chosen pair order
        let lp: u64 = (0..5)
            .flat_map(|i| (0..5).map(move |j| (i, j)))
            .filter(|&(i, j)| x[i][j] == 1)
            .map(|(i, j)| pref[j][i])
            .sum();
        let direct: u64 = s.rankings.iter().map(|r| kendall_tau(&k, r).unwrap()).sum();
        assert_eq!(lp, direct);
        let cyc = vec![vec![0, 1, 0], vec![0, 0, 1], vec![1, 0, 0]];
        assert!(!is_feasible_ordering(&cyc));
    }

    #[test]
    fn too_many_models() {
        let s = RankingSet::unnamed(vec![Permutation::identity(13)]).unwrap();
        assert!(kemeny_exact(&s).unwrap_err().to_string().contains("Borda"));
    }
}
