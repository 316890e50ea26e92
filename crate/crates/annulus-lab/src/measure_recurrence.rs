//! Exactly-verifiable Poincaré recurrence on finite measure-preserving
//! systems.
//!
//! A finite uniform measure space whose self-map preserves the counting
//! measure is exactly a permutation, so every statement here is checked in
//! integer arithmetic: return times, the nested sets
//! `A_n = ∪_{k≥n} f^{−k}(E)`, the equality of their measures, and the
//! emptiness of the exceptional set `E − ∩_n A_n`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// A finite measure-preserving system: a permutation of `{0, .., n−1}`
/// carrying the uniform measure `1/n` per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSystem {
    map: Vec<usize>,
    inverse: Vec<usize>,
}

impl FiniteSystem {
    /// Wrap a forward map; rejects anything that is not a bijection
    /// (a non-bijective self-map does not preserve the counting measure).
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "a finite system needs at least one state".into(),
            ));
        }
        let mut inverse = vec![usize::MAX; n];
        for (x, &y) in map.iter().enumerate() {
            if y >= n {
                return Err(Error::InvalidParameter(format!(
                    "map sends {x} to {y}, outside 0..{n}"
                )));
            }
            if inverse[y] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "map is not injective: {} and {x} both map to {y}",
                    inverse[y]
                )));
            }
            inverse[y] = x;
        }
        Ok(Self { map, inverse })
    }

    /// Uniformly random permutation from a seeded generator.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self::new(map)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    /// `f^{−1}(S)` as a membership mask.
    fn preimage_mask(&self, s: &[bool]) -> Vec<bool> {
        let mut out = vec![false; s.len()];
        for (y, &inside) in s.iter().enumerate() {
            if inside {
                out[self.inverse[y]] = true;
            }
        }
        out
    }

    /// Length of the cycle through `x`.
    pub fn cycle_length(&self, x: usize) -> usize {
        let mut y = self.apply(x);
        let mut len = 1;
        while y != x {
            y = self.apply(y);
            len += 1;
        }
        len
    }

    /// Longest cycle length of the permutation.
    pub fn max_cycle_length(&self) -> usize {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut longest = 0;
        for x in 0..n {
            if !seen[x] {
                let mut y = x;
                let mut len = 0;
                while !seen[y] {
                    seen[y] = true;
                    y = self.apply(y);
                    len += 1;
                }
                longest = longest.max(len);
            }
        }
        longest
    }
}

/// First-return time of one starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReturnTime {
    pub point: usize,
    /// Least `k ≥ 1` with `f^k(point) ∈ E`; at most `n` for permutations.
    pub time: usize,
}

fn validate_subset(sys: &FiniteSystem, e: &[usize]) -> Result<Vec<bool>> {
    if e.is_empty() {
        return Err(Error::InvalidParameter("the set E must be nonempty".into()));
    }
    let mut mask = vec![false; sys.len()];
    for &x in e {
        if x >= sys.len() {
            return Err(Error::InvalidParameter(format!(
                "set member {x} outside the state space 0..{}",
                sys.len()
            )));
        }
        mask[x] = true;
    }
    Ok(mask)
}

/// First-return time into `E` for every point of `E`. Permutations always
/// return within one full cycle, so the search is bounded by `n`.
pub fn recurrence_statistics(sys: &FiniteSystem, e: &[usize]) -> Result<Vec<ReturnTime>> {
    let mask = validate_subset(sys, e)?;
    let mut out = Vec::with_capacity(e.len());
    for (x, &inside) in mask.iter().enumerate() {
        if !inside {
            continue;
        }
        let mut y = sys.apply(x);
        let mut time = 1;
        while !mask[y] {
            y = sys.apply(y);
            time += 1;
            debug_assert!(time <= sys.len());
        }
        out.push(ReturnTime { point: x, time });
    }
    Ok(out)
}

/// Exact verification of the nested-set argument behind the recurrence
/// theorem, on one system and one subset.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct AnSetReport {
    pub system_size: usize,
    pub e_size: usize,
    /// `|A_i|` for `i = 0..=n_max`; all equal for a measure-preserving map.
    pub a_sizes: Vec<usize>,
    /// `E ⊆ A₀`.
    pub e_inside_a0: bool,
    /// `A_j ⊆ A_i` whenever `i ≤ j`.
    pub nested: bool,
    /// All `μ(A_i)` coincide (exact integer counts).
    pub measures_equal: bool,
    /// `|E − ∩_n A_n|` — the theorem's exceptional set; empty here.
    pub exceptional_count: usize,
}

/// Materialize `A_n = ∪_{k≥n} f^{−k}(E)` for `n = 0..=n_max` and check
/// the proof's set relations exactly.
///
/// The infinite union collapses: per cycle, `f^{−k}(E)` repeats with the
/// cycle's period, so taking `k` through `n .. n + max_cycle_length` covers
/// every tail term.
pub fn an_set_check(sys: &FiniteSystem, e: &[usize], n_max: usize) -> Result<AnSetReport> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let e_mask = validate_subset(sys, e)?;
    let e_size = e_mask.iter().filter(|&&b| b).count();
    let window = sys.max_cycle_length();

    // preimage masks f^{−k}(E) for k = 0 .. n_max + window − 1
    let mut pre = Vec::with_capacity(n_max + window);
    pre.push(e_mask.clone());
    for k in 1..n_max + window {
        let next = sys.preimage_mask(&pre[k - 1]);
        pre.push(next);
    }

    let union_over = |from: usize| -> Vec<bool> {
        let mut acc = vec![false; sys.len()];
        for mask in &pre[from..from + window] {
            for (a, &m) in acc.iter_mut().zip(mask) {
                *a |= m;
            }
        }
        acc
    };

    let a_sets: Vec<Vec<bool>> = (0..=n_max).map(union_over).collect();
    let a_sizes: Vec<usize> = a_sets
        .iter()
        .map(|s| s.iter().filter(|&&b| b).count())
        .collect();

    let e_inside_a0 = e_mask
        .iter()
        .zip(&a_sets[0])
        .all(|(&in_e, &in_a)| !in_e || in_a);
    let nested = a_sets.windows(2).all(|w| {
        w[1].iter().zip(&w[0]).all(|(&later, &earlier)| !later || earlier)
    });
    let measures_equal = a_sizes.windows(2).all(|w| w[0] == w[1]);

    // ∩_n A_n over the materialized range; exceptional set is E minus it
    let mut intersection = a_sets[0].clone();
    for s in &a_sets[1..] {
        for (acc, &m) in intersection.iter_mut().zip(s) {
            *acc &= m;
        }
    }
    let exceptional_count = e_mask
        .iter()
        .zip(&intersection)
        .filter(|&(&in_e, &in_int)| in_e && !in_int)
        .count();

    Ok(AnSetReport {
        system_size: sys.len(),
        e_size,
        a_sizes,
        e_inside_a0,
        nested,
        measures_equal,
        exceptional_count,
    })
}
