//! Finding `r` pairwise disjoint positively dependent subsets of a vector
//! list, i.e. subsets whose convex hull contains the origin.
//!
//! Positive dependence is upward closed and, by Carathéodory, every
//! dependent set contains a dependent subset of at most `d + 1` vectors, so
//! searching minimal subsets of that size is complete.

use crate::geometry::for_each_subset;
use crate::lp::{Field, LinearProgram, Relation};

/// Whether `0 ∈ conv(vectors)`.
pub fn positively_dependent<F: Field>(vectors: &[&[F]]) -> bool {
    let Some(first) = vectors.first() else {
        return false;
    };
    let d = first.len();
    let k = vectors.len();
    let mut lp = LinearProgram::<F>::new(k);
    for c in 0..d {
        lp.add(vectors.iter().map(|w| w[c].clone()).collect(), Relation::Eq, F::zero());
    }
    lp.add(vec![F::one(); k], Relation::Eq, F::one());
    lp.is_feasible()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packing {
    Found(Vec<Vec<usize>>),
    /// `cap_hit` is set when the exhaustive phase stopped at the node cap.
    NotFound { cap_hit: bool },
}

/// Greedy extraction, then exhaustive packing of minimal dependent subsets
/// of size `<= max_size`. `dependent` is queried on sorted index lists;
/// found sets are sorted and listed in order.
pub fn find_disjoint_dependent(
    n: usize,
    max_size: usize,
    r: usize,
    cap: usize,
    mut dependent: impl FnMut(&[usize]) -> bool,
) -> Packing {
    if r == 0 {
        return Packing::Found(Vec::new());
    }
    if let Some(mut found) = greedy(n, r, &mut dependent) {
        found.sort();
        return Packing::Found(found);
    }

    let mut minimal: Vec<Vec<usize>> = Vec::new();
    for_each_subset(n, max_size, |s| {
        if minimal.iter().any(|m| m.iter().all(|i| s.contains(i))) {
            return;
        }
        if dependent(s) {
            minimal.push(s.to_vec());
        }
    });
    if minimal.len() < r {
        return Packing::NotFound { cap_hit: false };
    }
    let mut nodes = 0usize;
    let mut chosen = Vec::new();
    let mut used = vec![false; n];
    match pack(&minimal, 0, r, &mut used, &mut chosen, &mut nodes, cap) {
        Some(true) => Packing::Found(chosen.iter().map(|&i| minimal[i].clone()).collect()),
        Some(false) => Packing::NotFound { cap_hit: false },
        None => Packing::NotFound { cap_hit: true },
    }
}

fn greedy(n: usize, r: usize, dependent: &mut impl FnMut(&[usize]) -> bool) -> Option<Vec<Vec<usize>>> {
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut found = Vec::with_capacity(r);
    for _ in 0..r {
        if remaining.is_empty() || !dependent(&remaining) {
            return None;
        }
        // drop elements one at a time while the rest stays dependent
        let mut set = remaining.clone();
        let mut i = 0;
        while i < set.len() {
            let mut trial = set.clone();
            trial.remove(i);
            if !trial.is_empty() && dependent(&trial) {
                set = trial;
            } else {
                i += 1;
            }
        }
        remaining.retain(|x| !set.contains(x));
        found.push(set);
    }
    Some(found)
}

/// `Some(true)` found, `Some(false)` exhausted, `None` cap reached.
fn pack(
    sets: &[Vec<usize>],
    start: usize,
    r: usize,
    used: &mut [bool],
    chosen: &mut Vec<usize>,
    nodes: &mut usize,
    cap: usize,
) -> Option<bool> {
    if chosen.len() == r {
        return Some(true);
    }
    for i in start..sets.len() {
        *nodes += 1;
        if *nodes > cap {
            return None;
        }
        if sets[i].iter().any(|&j| used[j]) {
            continue;
        }
        sets[i].iter().for_each(|&j| used[j] = true);
        chosen.push(i);
        match pack(sets, i + 1, r, used, chosen, nodes, cap) {
            Some(true) => return Some(true),
            None => return None,
            Some(false) => {}
        }
        chosen.pop();
        sets[i].iter().for_each(|&j| used[j] = false);
    }
    Some(false)
}
